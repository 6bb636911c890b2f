#include "foldcore/solvers/solve.hpp"

#include <sstream>

namespace foldcore {

double fixed_point_residual(const DifferentiableStep& step, const Vector& x, const Vector& c) {
  return (step.forward(x, c) - x).lpNorm<Eigen::Infinity>();
}

SolveReport solve(const DifferentiableStep& step, const Vector& c, const Vector& x0, double tol, int max_iter) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "solve: tol must be positive");
  require_size(x0.size(), step.state_dim(), "solve start");
  require_size(c.size(), step.param_dim(), "solve parameters");
  SolveReport rep;
  Vector x = x0;
  for (int k = 0; k < max_iter; ++k) {
    Vector next = step.forward(x, c);
    if (!all_finite(next)) {
      rep.x_star = x;
      rep.iterations = k;
      throw SolveError(ErrorCode::NonFinite, "solver iterate became non-finite", rep);
    }
    const double diff = (next - x).lpNorm<Eigen::Infinity>();
    x = std::move(next);
    rep.iterations = k + 1;
    if (diff < tol) {
      rep.converged = true;
      break;
    }
  }
  rep.x_star = x;
  rep.fixed_point_residual = fixed_point_residual(step, x, c);
  if (!rep.converged) {
    std::ostringstream os;
    os << "no convergence after " << max_iter << " iterations (residual " << rep.fixed_point_residual << ")";
    throw SolveError(ErrorCode::NoConvergence, os.str(), rep);
  }
  return rep;
}

}  // namespace foldcore
