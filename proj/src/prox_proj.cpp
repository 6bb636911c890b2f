#include "foldcore/prox_proj.hpp"

#include <algorithm>
#include <cmath>

namespace foldcore {

BoxSpec BoxSpec::uniform(Eigen::Index n, double lo, double hi) {
  if (lo > hi) throw Error(ErrorCode::InvalidArgument, "box: lo > hi");
  return BoxSpec{Vector::Constant(n, lo), Vector::Constant(n, hi)};
}

Vector soft_threshold(const Vector& x, double lambda) {
  if (lambda < 0.0) throw Error(ErrorCode::InvalidArgument, "soft_threshold: lambda must be >= 0");
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double m = std::max(std::abs(x(i)) - lambda, 0.0);
    out(i) = x(i) > 0 ? m : (x(i) < 0 ? -m : 0.0);
  }
  return out;
}

Vector soft_threshold_vjp(const Vector& x, double lambda, const Vector& v) {
  require_size(v.size(), x.size(), "soft_threshold_vjp cotangent");
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = std::abs(x(i)) > lambda ? v(i) : 0.0;
  return out;
}

namespace {

void check_box(const Vector& x, const BoxSpec& box) {
  require_size(box.lo.size(), x.size(), "box lo");
  require_size(box.hi.size(), x.size(), "box hi");
  if ((box.lo.array() > box.hi.array()).any()) throw Error(ErrorCode::InvalidArgument, "box: lo > hi");
}

}  // namespace

Vector project_box(const Vector& x, const BoxSpec& box) {
  check_box(x, box);
  return x.cwiseMax(box.lo).cwiseMin(box.hi);
}

Vector project_box_vjp(const Vector& x, const BoxSpec& box, const Vector& v) {
  check_box(x, box);
  require_size(v.size(), x.size(), "project_box_vjp cotangent");
  Vector out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = (x(i) > box.lo(i) && x(i) < box.hi(i)) ? v(i) : 0.0;
  return out;
}

Vector project_nonneg(const Vector& x) { return x.cwiseMax(0.0); }

Vector project_nonneg_vjp(const Vector& x, const Vector& v) {
  require_size(v.size(), x.size(), "project_nonneg_vjp cotangent");
  return (x.array() > 0.0).select(v, 0.0);
}

namespace {

void check_capped(const Vector& x, const CappedSimplexSpec& spec) {
  require_size(x.size(), spec.dim, "capped simplex input");
  if (!(spec.k > 0.0 && spec.k < static_cast<double>(spec.dim)))
    throw Error(ErrorCode::InvalidArgument, "capped simplex needs 0 < k < dim");
}

double clamped_sum(const Vector& x, double tau) { return (x.array() - tau).max(0.0).min(1.0).sum(); }

double capped_shift(const Vector& x, double k) {
  double lo = x.minCoeff() - 1.0, hi = x.maxCoeff();
  double tau = 0.5 * (lo + hi);
  bool ok = false;
  for (int it = 0; it < 200; ++it) {
    tau = 0.5 * (lo + hi);
    const double s = clamped_sum(x, tau);
    if (std::abs(s - k) < 1e-10) {
      ok = true;
      break;
    }
    if (s > k) lo = tau; else hi = tau;
  }
  if (!ok) throw Error(ErrorCode::NoConvergence, "capped simplex bisection failed (non-finite input?)");
  // Exact shift on the free set found by bisection, kept only if it
  // preserves the classification.
  double free_sum = 0.0;
  int nfree = 0, nupper = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double y = x(i) - tau;
    if (y >= 1.0) ++nupper;
    else if (y > 0.0) { free_sum += x(i); ++nfree; }
  }
  if (nfree == 0) return tau;
  const double exact = (free_sum + nupper - k) / nfree;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double y0 = x(i) - tau, y1 = x(i) - exact;
    const int c0 = y0 >= 1.0 ? 2 : (y0 > 0.0 ? 1 : 0);
    const int c1 = y1 >= 1.0 ? 2 : (y1 > 0.0 ? 1 : 0);
    if (c0 != c1) return tau;
  }
  return exact;
}

}  // namespace

Vector project_capped_simplex(const Vector& x, const CappedSimplexSpec& spec) {
  check_capped(x, spec);
  require_finite(x, "capped simplex input");
  // Already feasible to the bisection tolerance: return as is, so that
  // projecting twice is exact.
  if (x.minCoeff() >= 0.0 && x.maxCoeff() <= 1.0 && std::abs(x.sum() - spec.k) < 1e-10) return x;
  const double tau = capped_shift(x, spec.k);
  return (x.array() - tau).max(0.0).min(1.0).matrix();
}

Vector project_capped_simplex_vjp(const Vector& x, const CappedSimplexSpec& spec, const Vector& v) {
  require_size(v.size(), x.size(), "capped simplex vjp cotangent");
  const Vector y = project_capped_simplex(x, spec);
  double mean = 0.0;
  int nfree = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) > 0.0 && y(i) < 1.0) { mean += v(i); ++nfree; }
  if (nfree == 0) throw Error(ErrorCode::DegenerateFreeSet, "capped simplex projection has no free coordinates");
  mean /= nfree;
  Vector out = Vector::Zero(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) > 0.0 && y(i) < 1.0) out(i) = v(i) - mean;
  return out;
}

}  // namespace foldcore
