#pragma once

#include "foldcore/diff_step.hpp"
#include "foldcore/folding.hpp"
#include "foldcore/qp.hpp"
#include "foldcore/solvers/admm_qp.hpp"

#include <vector>

namespace foldcore {

// min f(x, c)  s.t.  g(x) ≤ 0, h(x) = 0, with everything at most quadratic:
//   f = ½xᵀFx + (f0 + C c)ᵀx
//   gᵢ = ½xᵀGᵢx + aᵢᵀx + bᵢ
//   h = E x − e
struct QuadraticProblem {
  Matrix F;
  Vector f0;
  Matrix C;  // n × p
  struct Constraint {
    Matrix G;  // empty for linear constraints
    Vector a;
    double b = 0.0;
  };
  std::vector<Constraint> ineq;
  Matrix E;
  Vector e;

  Eigen::Index n() const { return F.rows(); }
  Eigen::Index m_in() const { return static_cast<Eigen::Index>(ineq.size()); }
  Eigen::Index m_eq() const { return E.rows(); }
  Eigen::Index param_dim() const { return C.cols(); }
  void validate() const;

  double objective(const Vector& x, const Vector& c) const;
  Vector objective_gradient(const Vector& x, const Vector& c) const;
  Vector ineq_values(const Vector& x) const;
  Matrix ineq_jacobian(const Vector& x) const;
  Vector eq_values(const Vector& x) const { return E * x - e; }
  // ∇²ₓₓ of f + μᵀg
  Matrix lagrangian_hessian(const Vector& mu) const;
  // Largest violation of g ≤ 0 and h = 0.
  double infeasibility(const Vector& x) const;
  // Max of stationarity, primal and dual infeasibility and complementarity.
  double kkt_residual(const Vector& x, const Vector& mu, const Vector& nu, const Vector& c) const;
};

enum class DualUpdate {
  Scaled,  // λ⁺ = α(μ − λ)
  Convex,  // λ⁺ = λ + α(μ − λ)
};

struct SqpConfig {
  double alpha = 0.5;
  DualUpdate dual_update = DualUpdate::Scaled;
  double admm_rho = 1.0;
  double split_offset = 1.0;     // lift of free subproblem variables into x⁺, x⁻ ≥ 0
  double inner_backward_tol = 1e-13;
};

// One SQP update on the state (x, λ), λ = [μ (inequalities); ν (equalities)]:
//   (d, μ') = argmin ∇fᵀd + dᵀ∇²L d  s.t.  h + ∇hᵀd = 0, g + ∇gᵀd ≤ 0
//   x⁺ = x + αd,  λ⁺ per `dual_update`.
// The subproblem is solved by the dense active-set method and differentiated
// as a folded ADMM layer on its standard form.
class SqpStep : public DifferentiableStep {
 public:
  SqpStep(QuadraticProblem problem, SqpConfig config = {});

  Eigen::Index state_dim() const override { return problem_.n() + problem_.m_in() + problem_.m_eq(); }
  Eigen::Index param_dim() const override { return problem_.param_dim(); }
  Vector forward(const Vector& s, const Vector& c) const override;
  std::unique_ptr<StepLinearization> linearize(const Vector& s, const Vector& c) const override;

  const QuadraticProblem& problem() const { return problem_; }
  const SqpConfig& config() const { return config_; }

  QpGeneral subproblem(const Vector& s, const Vector& c) const;
  // State at which (x*, μ*, ν*) is a fixed point under the configured dual
  // update (λ = αμ/(1 + α) for the scaled form, λ = μ for the convex one).
  Vector fixed_point_state(const Vector& x, const Vector& mu, const Vector& nu) const;
  // True multipliers from a fixed-point state.
  Vector multipliers(const Vector& s) const;

 private:
  QuadraticProblem problem_;
  SqpConfig config_;
};

// Runs the SQP iteration itself from s0 (the multipliers block may be zero).
SolveReport sqp_solve(const SqpStep& step, const Vector& c, const Vector& s0, double tol = 1e-10,
                      int max_iter = 5000);

}  // namespace foldcore
