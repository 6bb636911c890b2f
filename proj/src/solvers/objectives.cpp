#include "foldcore/solvers/objectives.hpp"

#include <cmath>

namespace foldcore {

double SquaredDistance::value(const Vector& x, const Vector& c) const { return 0.5 * (x - c).squaredNorm(); }
Vector SquaredDistance::gradient(const Vector& x, const Vector& c) const { return x - c; }
Vector SquaredDistance::hessian_vjp(const Vector&, const Vector&, const Vector& w) const { return w; }
Vector SquaredDistance::mixed_vjp(const Vector&, const Vector&, const Vector& w) const { return -w; }

double QuadraticLinearParam::value(const Vector& x, const Vector& c) const { return 0.5 * x.dot(Q_ * x) + c.dot(x); }
Vector QuadraticLinearParam::gradient(const Vector& x, const Vector& c) const { return Q_ * x + c; }
Vector QuadraticLinearParam::hessian_vjp(const Vector&, const Vector&, const Vector& w) const { return Q_ * w; }
Vector QuadraticLinearParam::mixed_vjp(const Vector&, const Vector&, const Vector& w) const { return w; }

namespace {
constexpr double kEntropyFloor = 1e-12;
}

double EntropicLinear::value(const Vector& x, const Vector& c) const {
  double v = -c.dot(x);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) > 0) v += x(i) * std::log(std::max(x(i), kEntropyFloor));
  return v;
}

Vector EntropicLinear::gradient(const Vector& x, const Vector& c) const {
  return (-c.array() + x.array().max(kEntropyFloor).log() + 1.0).matrix();
}

Vector EntropicLinear::hessian_vjp(const Vector& x, const Vector&, const Vector& w) const {
  return (w.array() / x.array().max(kEntropyFloor)).matrix();
}

Vector EntropicLinear::mixed_vjp(const Vector&, const Vector&, const Vector& w) const { return -w; }

Projector::Vjp BoxProjector::linearize(const Vector& s) const {
  return [s, box = box_](const Vector& v) { return project_box_vjp(s, box, v); };
}

Projector::Vjp NonnegProjector::linearize(const Vector& s) const {
  return [s](const Vector& v) { return project_nonneg_vjp(s, v); };
}

CappedSimplexProjector::CappedSimplexProjector(std::vector<CappedSimplexSpec> blocks) : blocks_(std::move(blocks)) {
  for (const auto& b : blocks_) dim_ += b.dim;
}

Vector CappedSimplexProjector::project(const Vector& s) const {
  require_size(s.size(), dim_, "capped simplex projector input");
  Vector out(dim_);
  Eigen::Index off = 0;
  for (const auto& b : blocks_) {
    out.segment(off, b.dim) = project_capped_simplex(s.segment(off, b.dim), b);
    off += b.dim;
  }
  return out;
}

Projector::Vjp CappedSimplexProjector::linearize(const Vector& s) const {
  require_size(s.size(), dim_, "capped simplex projector input");
  // Record free-set masks once; the VJP is then a cheap masked centering.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
  Vector y = project(s);
  Eigen::Matrix<bool, Eigen::Dynamic, 1> free(dim_);
  for (Eigen::Index i = 0; i < dim_; ++i) free(i) = y(i) > 0.0 && y(i) < 1.0;
  Eigen::Index off = 0;
  for (const auto& b : blocks_) {
    ranges.emplace_back(off, b.dim);
    off += b.dim;
  }
  return [ranges, free](const Vector& v) {
    Vector out = Vector::Zero(v.size());
    for (const auto& [o, d] : ranges) {
      double mean = 0.0;
      int nf = 0;
      for (Eigen::Index i = o; i < o + d; ++i)
        if (free(i)) { mean += v(i); ++nf; }
      if (nf == 0) continue;
      mean /= nf;
      for (Eigen::Index i = o; i < o + d; ++i)
        if (free(i)) out(i) = v(i) - mean;
    }
    return out;
  };
}

L1Prox::L1Prox(double lambda) : lambda_(lambda) {
  if (lambda < 0.0) throw Error(ErrorCode::InvalidArgument, "L1 prox: lambda must be >= 0");
}

ProxOperator::Vjp L1Prox::linearize(const Vector& s, double alpha) const {
  return [s, t = alpha * lambda_](const Vector& v) { return soft_threshold_vjp(s, t, v); };
}

}  // namespace foldcore
