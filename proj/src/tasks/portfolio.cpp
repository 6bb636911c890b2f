#include "foldcore/tasks/portfolio.hpp"

#include <cmath>
#include <vector>

namespace foldcore {

QuadraticProblem portfolio_problem(const Matrix& V, double gamma) {
  const Eigen::Index n = V.rows();
  if (V.cols() != n) throw Error(ErrorCode::ShapeMismatch, "portfolio: V must be square");
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "portfolio: gamma must be positive");
  QuadraticProblem pr;
  pr.F = Matrix::Zero(n, n);
  pr.f0 = Vector::Zero(n);
  pr.C = -Matrix::Identity(n, n);
  pr.ineq.push_back({2.0 * V, Vector::Zero(n), -gamma});
  for (Eigen::Index i = 0; i < n; ++i) pr.ineq.push_back({Matrix(), -Vector::Unit(n, i), 0.0});
  pr.E = Matrix::Ones(1, n);
  pr.e = Vector::Ones(1);
  return pr;
}

namespace {

struct Penalized {
  QpSolution sol;
  double excess = 0.0;  // xᵀVx − γ
};

Penalized penalized(const Matrix& V, double gamma, const Vector& c, double lam) {
  const Eigen::Index n = V.rows();
  QpGeneral qp;
  qp.Q = 2.0 * lam * V;
  qp.p = -c;
  qp.A = Matrix::Ones(1, n);
  qp.b = Vector::Ones(1);
  qp.G = -Matrix::Identity(n, n);
  qp.h = Vector::Zero(n);
  Penalized r;
  r.sol = solve_qp_active_set(qp);
  r.excess = r.sol.x.dot(V * r.sol.x) - gamma;
  return r;
}

}  // namespace

PortfolioSolution solve_portfolio(const Matrix& V, double gamma, const Vector& c, double tol) {
  const Eigen::Index n = V.rows();
  require_size(c.size(), n, "portfolio prices");
  require_finite(c, "portfolio prices");
  Eigen::Index best;
  const double top = c.maxCoeff(&best);
  // Assets tied at the top price. The generator's 0/1 mixing matrix makes
  // exact ties common; on a tied face the least risky mix may fit the budget
  // even though no single asset does.
  std::vector<Eigen::Index> face;
  for (Eigen::Index i = 0; i < n; ++i)
    if (top - c(i) <= 1e-14 * (1.0 + std::abs(top))) face.push_back(i);
  Vector slack_x;
  if (face.size() == 1) {
    if (V(best, best) <= gamma) slack_x = Vector::Unit(n, best);
  } else {
    const Eigen::Index k = static_cast<Eigen::Index>(face.size());
    QpGeneral qp;
    qp.Q = Matrix(k, k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b < k; ++b) qp.Q(a, b) = 2.0 * V(face[a], face[b]);
    qp.p = Vector::Zero(k);
    qp.A = Matrix::Ones(1, k);
    qp.b = Vector::Ones(1);
    qp.G = -Matrix::Identity(k, k);
    qp.h = Vector::Zero(k);
    const Vector xf = solve_qp_active_set(qp).x;
    if (xf.dot(qp.Q * xf) / 2.0 <= gamma) {
      slack_x = Vector::Zero(n);
      for (Eigen::Index a = 0; a < k; ++a) slack_x(face[a]) = std::max(0.0, xf(a));
      slack_x /= slack_x.sum();
    }
  }
  if (slack_x.size() > 0) {
    PortfolioSolution out;
    out.x = slack_x;
    out.risk_binding = false;
    out.budget_multiplier = top;
    out.bound_multipliers = Vector::Constant(n, top) - c;
    return out;
  }

  // Bracket: excess decreases in λ, positive for small λ.
  const double scale = std::max(1e-12, c.cwiseAbs().maxCoeff()) / V.diagonal().maxCoeff();
  double lo = 1e-8 * scale, hi = scale;
  Penalized plo = penalized(V, gamma, c, lo), phi = penalized(V, gamma, c, hi);
  for (int i = 0; plo.excess <= 0.0 && i < 60; ++i) plo = penalized(V, gamma, c, lo *= 0.1);
  for (int i = 0; phi.excess > 0.0 && i < 200; ++i) phi = penalized(V, gamma, c, hi *= 2.0);
  if (plo.excess <= 0.0 || phi.excess > 0.0)
    throw Error(ErrorCode::NoConvergence, "portfolio: could not bracket the risk multiplier");

  // Illinois false position on λ ↦ risk excess.
  double flo = plo.excess, fhi = phi.excess;
  int side = 0, steps = 0;
  Penalized cur = phi;
  double lam = hi;
  for (; steps < 500; ++steps) {
    lam = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(lam > lo && lam < hi)) lam = 0.5 * (lo + hi);
    cur = penalized(V, gamma, c, lam);
    if (std::abs(cur.excess) <= tol * gamma || hi - lo <= 1e-16 * hi) break;
    if (cur.excess > 0.0) {
      lo = lam;
      flo = cur.excess;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = lam;
      fhi = cur.excess;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  PortfolioSolution out;
  out.x = cur.sol.x;
  out.risk_multiplier = lam;
  out.bound_multipliers = cur.sol.ineq_multipliers;
  out.budget_multiplier = cur.sol.eq_multipliers(0);
  out.bisection_steps = steps;
  return out;
}

namespace {

FoldingOptions portfolio_folding(FoldingOptions f) {
  f.forward_tol = std::max(f.forward_tol, 1e-10);
  return f;
}

}  // namespace

PortfolioDecision::PortfolioDecision(Matrix V, double gamma, SqpConfig sqp, FoldingOptions folding)
    : V_(std::move(V)),
      gamma_(gamma),
      step_(std::make_shared<SqpStep>(portfolio_problem(V_, gamma_), sqp)),
      layer_(step_,
             [this](const Vector& c, const Vector*) {
               SolveReport r;
               r.x_star = state(c);
               r.converged = true;
               return r;
             },
             portfolio_folding(folding)) {}

Vector PortfolioDecision::state(const Vector& c) const { return state_from(solve_portfolio(V_, gamma_, c)); }

Vector PortfolioDecision::state_from(const PortfolioSolution& sol) const {
  if (!sol.risk_binding)
    throw Error(ErrorCode::InvalidArgument, "portfolio: risk budget is slack, the SQP state is degenerate");
  Vector mu(V_.rows() + 1);
  mu << sol.risk_multiplier, sol.bound_multipliers;
  return step_->fixed_point_state(sol.x, mu, Vector::Constant(1, sol.budget_multiplier));
}

Vector PortfolioDecision::decide(const Vector& c) const { return solve_portfolio(V_, gamma_, c).x; }

Vector PortfolioDecision::decide_vjp(const Vector& c, const Vector&, const Vector& g) const {
  const PortfolioSolution sol = solve_portfolio(V_, gamma_, c);
  if (!sol.risk_binding) return Vector::Zero(c.size());
  const Vector s = state_from(sol);
  Vector gs = Vector::Zero(s.size());
  gs.head(V_.rows()) = g;
  return layer_.backward_vjp(c, s, gs).grad_c;
}

DecisionObjective portfolio_objective() {
  DecisionObjective f;
  f.value = [](const Vector& x, const Vector& c) { return -c.dot(x); };
  f.grad_x = [](const Vector&, const Vector& c) -> Vector { return -c; };
  return f;
}

}  // namespace foldcore
