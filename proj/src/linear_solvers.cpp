#include "foldcore/linear_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace foldcore {

namespace {

void check_square(const LinearOperator& op, Eigen::Index n, const char* who) {
  if (op.dim_in != op.dim_out) throw Error(ErrorCode::ShapeMismatch, std::string(who) + ": operator not square");
  require_size(n, op.dim_in, who);
}

}  // namespace

LinSolveReport lfpi(const LinearOperator& B, const Vector& b, const Vector& z0, double tol, int max_iter) {
  check_square(B, b.size(), "lfpi rhs");
  require_size(z0.size(), b.size(), "lfpi start");
  if (tol <= 0.0) throw Error(ErrorCode::InvalidArgument, "lfpi: tol must be positive");
  LinSolveReport rep;
  Vector z = z0;
  for (int k = 0; k < max_iter; ++k) {
    Vector next = B.apply(z) + b;
    const double diff = (next - z).lpNorm<Eigen::Infinity>();
    const double mag = next.lpNorm<Eigen::Infinity>();
    rep.iterations = k + 1;
    rep.per_iter_residuals.push_back(diff);
    if (!std::isfinite(mag) || mag > 1e12) {
      rep.solution = z;
      std::ostringstream os;
      os << "lfpi iterate norm " << mag << " after " << (k + 1) << " iterations";
      throw LinSolveError(ErrorCode::Divergence, os.str(), rep);
    }
    z = std::move(next);
    if (diff < tol) {
      rep.converged = true;
      break;
    }
  }
  rep.solution = z;
  rep.residual_norm = (z - B.apply(z) - b).lpNorm<Eigen::Infinity>();
  return rep;
}

LinSolveReport krylov_solve(const LinearOperator& A, const Vector& b, const Vector& x0, double tol,
                            int max_iter) {
  check_square(A, b.size(), "krylov rhs");
  require_size(x0.size(), b.size(), "krylov start");
  if (tol <= 0.0) throw Error(ErrorCode::InvalidArgument, "krylov: tol must be positive");
  const Eigen::Index n = b.size();
  const int restart = static_cast<int>(std::min<Eigen::Index>(30, n));
  const double target = tol * (1.0 + b.norm());

  LinSolveReport rep;
  Vector x = x0;
  Vector r = b - A.apply(x);
  double beta = r.norm();
  bool breakdown = false;

  while (beta > target && rep.iterations < max_iter && !breakdown) {
    const double beta_start = beta;
    bool invariant = false;
    Matrix V(restart + 1, n);  // basis vectors as rows
    Matrix H = Matrix::Zero(restart + 1, restart);
    Vector cs = Vector::Zero(restart), sn = Vector::Zero(restart);
    Vector g = Vector::Zero(restart + 1);
    g(0) = beta;
    V.row(0) = (r / beta).transpose();
    int k = 0;
    for (int j = 0; j < restart && rep.iterations < max_iter; ++j) {
      Vector w = A.apply(V.row(j).transpose());
      const double wnorm0 = w.norm();
      // Modified Gram-Schmidt, twice for orthogonality in floating point.
      for (int pass = 0; pass < 2; ++pass) {
        for (int i = 0; i <= j; ++i) {
          const double hij = V.row(i).dot(w);
          H(i, j) += hij;
          w -= hij * V.row(i).transpose();
        }
      }
      const double hnext = w.norm();
      H(j + 1, j) = hnext;
      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      if (denom == 0.0) {
        invariant = true;
        break;
      }
      cs(j) = H(j, j) / denom;
      sn(j) = H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      ++rep.iterations;
      ++k;
      rep.per_iter_residuals.push_back(std::abs(g(j + 1)));
      if (hnext < 1e-14 * std::max(1.0, wnorm0)) {
        invariant = true;
        break;
      }
      if (std::abs(g(j + 1)) <= target) break;
      V.row(j + 1) = (w / hnext).transpose();
    }
    if (k > 0) {
      Vector y(k);
      for (int i = k - 1; i >= 0; --i) {
        double s = g(i);
        for (int l = i + 1; l < k; ++l) s -= H(i, l) * y(l);
        y(i) = s / H(i, i);
      }
      x += V.topRows(k).transpose() * y;
    }
    r = b - A.apply(x);
    beta = r.norm();
    if (!std::isfinite(beta)) throw Error(ErrorCode::NonFinite, "krylov residual became non-finite");
    // An invariant subspace normally means the solution is in hand up to
    // rounding; restart from it, and give up only if that made no progress.
    if (invariant && beta > target && beta > 0.5 * beta_start) breakdown = true;
  }

  rep.solution = x;
  rep.residual_norm = r.lpNorm<Eigen::Infinity>();
  rep.converged = beta <= target;
  if (!rep.converged) {
    std::ostringstream os;
    os << "krylov residual " << beta << " above target " << target << " after " << rep.iterations
       << " iterations";
    if (breakdown) throw LinSolveError(ErrorCode::Breakdown, os.str(), rep);
    throw LinSolveError(ErrorCode::NoConvergence, os.str(), rep);
  }
  return rep;
}

double empirical_rate(const std::vector<double>& per_iter_residuals) {
  const size_t n = per_iter_residuals.size();
  if (n < 5) throw Error(ErrorCode::InsufficientData, "empirical_rate needs at least 5 residuals");
  for (double r : per_iter_residuals)
    if (!(r > 0.0) || !std::isfinite(r))
      throw Error(ErrorCode::InsufficientData, "empirical_rate needs positive finite residuals");
  const size_t ratios = n - 1;
  const size_t use = (ratios + 1) / 2;
  double acc = 0.0;
  for (size_t i = n - use; i < n; ++i) acc += std::log(per_iter_residuals[i] / per_iter_residuals[i - 1]);
  return -acc / static_cast<double>(use);
}

}  // namespace foldcore
