#include "foldcore/tasks/qp_layer.hpp"

namespace foldcore {

QpStandard random_standard_qp(Rng& rng, Eigen::Index n, Eigen::Index m) {
  if (n < 1 || m < 0 || m >= n) throw Error(ErrorCode::InvalidArgument, "random_standard_qp needs 0 <= m < n");
  const Matrix M = rng.normal_matrix(n, n);
  QpStandard qp;
  qp.Q = M.transpose() * M + 0.5 * Matrix::Identity(n, n);
  qp.p = rng.normal_vector(n);
  qp.A = rng.normal_matrix(m, n);
  Vector x0 = rng.uniform_vector(n, 0.0, 1.0);
  // Zero some entries but keep m + 1 positive, so the feasible set is more
  // than a single point.
  Eigen::Index positive = n;
  for (Eigen::Index i = 0; i < n; ++i)
    if (rng.uniform() < 0.3 && positive > m + 1) {
      x0(i) = 0.0;
      --positive;
    }
  qp.b = qp.A * x0;
  return qp;
}

namespace {

FoldingOptions with_forward_tol(FoldingOptions f, double tol) {
  f.forward_tol = tol;
  return f;
}

}  // namespace

AdmmQpLayer::AdmmQpLayer(QpStandard base, AdmmLayerOptions options)
    : base_(std::move(base)),
      layer_(std::make_shared<AdmmQpStep>(AffineQpParametrization::linear_term(base_), options.rho),
             [b = base_, options](const Vector& c, const Vector* x0) {
               QpStandard qp = b;
               qp.p = c;
               if (options.exact_forward) {
                 const QpSolution sol = solve_qp_active_set(standard_as_general(qp));
                 SolveReport rep;
                 rep.x_star = admm_fixed_point(qp, sol.x, options.rho);
                 rep.dual = sol.eq_multipliers;
                 rep.converged = true;
                 return rep;
               }
               const AdmmResult r = admm_qp_solve(qp, options.rho, options.forward_tol, options.forward_max_iter, x0);
               SolveReport rep;
               rep.x_star = r.state;
               rep.dual = r.nu;
               rep.iterations = r.iterations;
               rep.converged = r.converged;
               if (!r.converged)
                 throw SolveError(ErrorCode::NoConvergence, "admm did not reach the forward tolerance", rep);
               return rep;
             },
             with_forward_tol(options.folding, options.forward_tol)) {}

Vector AdmmQpLayer::state_cotangent(const Vector& x_bar) const {
  require_size(x_bar.size(), n(), "qp primal cotangent");
  Vector g = Vector::Zero(3 * n());
  g.segment(n(), n()) = x_bar;
  return g;
}

}  // namespace foldcore
