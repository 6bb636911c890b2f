#include "foldcore/folding.hpp"

#include "foldcore/rng.hpp"

#include <cmath>
#include <sstream>

namespace foldcore {

FoldedLayer::FoldedLayer(std::shared_ptr<const DifferentiableStep> step, ForwardSolver solver, FoldingOptions options)
    : step_(std::move(step)), solver_(std::move(solver)), options_(options) {
  if (!step_) throw Error(ErrorCode::InvalidArgument, "folded layer needs a step");
  if (!solver_) throw Error(ErrorCode::InvalidArgument, "folded layer needs a forward solver");
}

FoldedLayer FoldedLayer::with_method(BackwardMethod method) const {
  FoldingOptions o = options_;
  o.method = method;
  return FoldedLayer(step_, solver_, o);
}

SolveReport FoldedLayer::forward(const Vector& c, const Vector* x0) const {
  require_size(c.size(), step_->param_dim(), "layer parameters");
  SolveReport rep = solver_(c, x0);
  require_size(rep.x_star.size(), step_->state_dim(), "forward solution");
  rep.fixed_point_residual = fixed_point_residual(*step_, rep.x_star, c);
  return rep;
}

double FoldedLayer::check_fixed_point(const Vector& c, const Vector& x, double factor) const {
  const double res = fixed_point_residual(*step_, x, c);
  if (!(res <= factor * options_.forward_tol)) {
    std::ostringstream os;
    os << "fixed-point residual " << res << " exceeds " << factor << " x forward tol " << options_.forward_tol;
    throw Error(ErrorCode::NotAFixedPoint, os.str(), res);
  }
  return res;
}

SolveReport FoldedLayer::verify_fixed_point(const Vector& c) const {
  SolveReport rep = forward(c);
  check_fixed_point(c, rep.x_star, 10.0);
  return rep;
}

LinearOperator phi_transpose_operator(const StepLinearization& lin, Eigen::Index n) {
  LinearOperator op;
  op.dim_in = n;
  op.dim_out = n;
  op.apply = [&lin](const Vector& v) { return lin.vjp_state(v); };
  op.apply_transpose = [&lin, n](const Vector&) -> Vector {
    throw Error(ErrorCode::InvalidArgument, "forward-mode product of a step is not available");
    return Vector::Zero(n);
  };
  return op;
}

double FoldedLayer::estimate_rho(const Vector& c, const Vector& x_star) const {
  const auto lin = step_->linearize(x_star, c);
  const LinearOperator op = phi_transpose_operator(*lin, step_->state_dim());
  try {
    return spectral_radius(op, 3000, 1e-10);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoConvergence && e.estimate()) return *e.estimate();
    throw;
  }
}

BackwardReport FoldedLayer::backward_vjp(const Vector& c, const Vector& x_star, const Vector& g) const {
  require_size(c.size(), step_->param_dim(), "layer parameters");
  require_size(x_star.size(), step_->state_dim(), "fixed point");
  check_fixed_point(c, x_star);
  const auto lin = step_->linearize(x_star, c);
  try {
    return backward_vjp(*lin, g);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Divergence && e.code() != ErrorCode::NoConvergence && e.code() != ErrorCode::Breakdown)
      throw;
    double rho = std::nan("");
    try {
      rho = estimate_rho(c, x_star);
    } catch (const Error&) {
    }
    std::ostringstream os;
    os << "backward solve failed (" << e.what() << "); estimated spectral radius of the step Jacobian " << rho;
    throw Error(e.code(), os.str(), rho);
  }
}

BackwardReport FoldedLayer::backward_vjp(const StepLinearization& lin, const Vector& g) const {
  const Eigen::Index n = step_->state_dim();
  require_size(g.size(), n, "output cotangent");
  require_finite(g, "output cotangent");
  LinSolveReport ls;
  if (options_.method == BackwardMethod::Lfpi) {
    const LinearOperator B = phi_transpose_operator(lin, n);
    ls = lfpi(B, g, g, options_.backward_tol, options_.backward_max_iter);
    if (!ls.converged)
      throw LinSolveError(ErrorCode::NoConvergence, "lfpi backward did not converge", ls);
  } else {
    LinearOperator A;
    A.dim_in = A.dim_out = n;
    A.apply = [&lin](const Vector& w) -> Vector { return w - lin.vjp_state(w); };
    A.apply_transpose = [](const Vector& w) -> Vector {
      throw Error(ErrorCode::InvalidArgument, "forward-mode product of a step is not available");
      return w;
    };
    ls = krylov_solve(A, g, g, options_.backward_tol, options_.backward_max_iter);
  }
  BackwardReport rep;
  rep.adjoint = ls.solution;
  rep.grad_c = lin.vjp_param(ls.solution);
  rep.iterations = ls.iterations;
  rep.residual = ls.residual_norm;
  rep.converged = ls.converged;
  rep.per_iter_residuals = std::move(ls.per_iter_residuals);
  if (!all_finite(rep.grad_c)) throw Error(ErrorCode::NonFinite, "backward gradient is not finite");
  return rep;
}

Matrix FoldedLayer::jacobian_dense(const Vector& c, const Vector& x_star) const {
  const StepJacobians jac = assemble_jacobians(*step_, x_star, c);
  const Eigen::Index n = jac.phi.rows();
  const Matrix IminusPhi = Matrix::Identity(n, n) - jac.phi;
  try {
    const LuFactorization lu(IminusPhi);
    Matrix J(n, jac.psi.cols());
    for (Eigen::Index j = 0; j < jac.psi.cols(); ++j) J.col(j) = lu.solve(jac.psi.col(j));
    return J;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SingularMatrix) throw Error(ErrorCode::SingularSystem, e.what(), e.estimate());
    throw;
  }
}

Matrix FoldedLayer::unfold_jacobian(const Vector& c, const Vector& x_star, int k) const {
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "unfold_jacobian: k must be >= 0");
  const StepJacobians jac = assemble_jacobians(*step_, x_star, c);
  Matrix J = jac.psi;
  for (int i = 0; i < k; ++i) J = jac.phi * J + jac.psi;
  return J;
}

namespace {

double l1(const Matrix& m) { return m.cwiseAbs().sum(); }

}  // namespace

TrajectoryRecord rate_study(const FoldedLayer& layer, const Vector& c, StartMode mode, int k, uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "rate_study: k must be >= 1");
  const DifferentiableStep& step = layer.step();
  const SolveReport fwd = layer.forward(c);
  const Vector& x_star = fwd.x_star;
  const Matrix J_ref = layer.jacobian_dense(c, x_star);
  TrajectoryRecord rec;
  rec.forward_tol = layer.options().forward_tol;
  rec.rho = layer.estimate_rho(c, x_star);

  const Eigen::Index n = step.state_dim();
  Vector x;
  if (mode == StartMode::FixedPoint) {
    x = x_star;
  } else {
    Rng rng(seed);
    x = rng.uniform_vector(n, 0.0, 1.0);
  }
  Matrix J = Matrix::Zero(n, step.param_dim());
  const double xs_norm = std::max(x_star.lpNorm<1>(), 1e-300);
  const double j_norm = std::max(l1(J_ref), 1e-300);
  for (int i = 1; i <= k; ++i) {
    const StepJacobians jac = assemble_jacobians(step, x, c);
    J = jac.phi * J + jac.psi;
    x = step.forward(x, c);
    if (!all_finite(x) || !all_finite(J)) throw Error(ErrorCode::NonFinite, "rate_study trajectory became non-finite");
    TrajectoryRow row;
    row.iter = i;
    row.forward_rel_err = (x - x_star).lpNorm<1>() / xs_norm;
    row.backward_rel_err = l1(J - J_ref) / j_norm;
    row.rho_estimate = rec.rho;
    rec.rows.push_back(row);
  }
  return rec;
}

double decay_ratio(const std::vector<double>& errors) {
  if (errors.size() < 4) throw Error(ErrorCode::InsufficientData, "decay_ratio needs at least 4 entries");
  const size_t n = errors.size();
  const size_t start = n / 2;
  double acc = 0.0;
  for (size_t i = start + 1; i < n; ++i) {
    if (!(errors[i] > 0.0) || !(errors[i - 1] > 0.0))
      throw Error(ErrorCode::InsufficientData, "decay_ratio needs positive entries");
    acc += std::log(errors[i] / errors[i - 1]);
  }
  return std::exp(acc / static_cast<double>(n - 1 - start));
}

}  // namespace foldcore
