#pragma once

#include "foldcore/learning/losses.hpp"
#include "foldcore/solvers/sqp.hpp"

namespace foldcore {

// max cᵀx  s.t.  xᵀVx ≤ γ, Σx = 1, x ≥ 0, written in minimization form with
// the prices c as parameters. Inequality order: risk first, then −xᵢ ≤ 0.
QuadraticProblem portfolio_problem(const Matrix& V, double gamma);

struct PortfolioSolution {
  Vector x;
  double risk_multiplier = 0.0;
  Vector bound_multipliers;
  double budget_multiplier = 0.0;
  bool risk_binding = true;
  int bisection_steps = 0;
};

// Solves the risk-penalized QP min −cᵀx + λ(xᵀVx − γ) over the simplex and
// searches λ until the risk constraint holds with equality. When the
// least risky mix of the top-priced assets fits the budget, that mix is the
// answer and risk_binding is false.
PortfolioSolution solve_portfolio(const Matrix& V, double gamma, const Vector& c, double tol = 1e-13);

// Decision map x*(c) with the SQP update as the folded step. Where the risk
// budget is slack the decision is a single-asset vertex, locally constant
// in c, and its VJP is zero.
class PortfolioDecision : public DecisionMap {
 public:
  PortfolioDecision(Matrix V, double gamma, SqpConfig sqp = {}, FoldingOptions folding = {});
  // The forward solver refers back to this object.
  PortfolioDecision(const PortfolioDecision&) = delete;
  PortfolioDecision& operator=(const PortfolioDecision&) = delete;

  Eigen::Index param_dim() const override { return V_.rows(); }
  Eigen::Index decision_dim() const override { return V_.rows(); }
  Vector decide(const Vector& c) const override;
  Vector decide_vjp(const Vector& c, const Vector& x, const Vector& g) const override;

  const FoldedLayer& layer() const { return layer_; }
  const SqpStep& step() const { return *step_; }
  // SQP fixed-point state for x*(c); needs the risk constraint to bind.
  Vector state(const Vector& c) const;
  Vector state_from(const PortfolioSolution& sol) const;
  const Matrix& V() const { return V_; }
  double gamma() const { return gamma_; }

 private:
  Matrix V_;
  double gamma_;
  std::shared_ptr<SqpStep> step_;
  FoldedLayer layer_;
};

// f(x, c) = −cᵀx
DecisionObjective portfolio_objective();

}  // namespace foldcore
