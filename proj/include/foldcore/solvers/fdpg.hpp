#pragma once

#include "foldcore/diff_step.hpp"

namespace foldcore {

// Dual proximal gradient for  min_x ½‖x − d‖² + λ‖Dx‖₁  with Nesterov
// momentum. One update on (w, y) at momentum counter t:
//   u  = Dᵀw + d
//   y⁺ = w − Du/L + T_{Lλ}(Du − Lw)/L
//   t⁺ = (1 + √(1 + 4t²))/2
//   w⁺ = y⁺ + ((t − 1)/t⁺)(y⁺ − y)
// L must bound ‖D‖₂²; L = 4 covers the plain differencing operator.
struct FdpgConfig {
  double lambda = 0.5;
  double lipschitz = 4.0;
  double tol = 1e-10;
  int max_iter = 100000;
  bool adaptive_restart = true;  // reset t when the momentum points uphill
  bool polish = true;            // exact solve on the identified active set
};

struct FdpgResult {
  Vector w, y;
  double t = 1.0;
  int iterations = 0;
  bool converged = false;
  bool polished = false;
};

// Smallest valid L for a given D (with a 1% margin), never below 4.
double fdpg_lipschitz(const Matrix& D);

FdpgResult fdpg_solve(const Matrix& D, const Vector& d, const FdpgConfig& cfg, const Vector* w0 = nullptr);

// The update with t frozen. State (w, y) ∈ R^{2m}, parameters vec(D) in
// row-major order (m·n entries). d, λ, L and t are constants.
class FdpgStep : public DifferentiableStep {
 public:
  FdpgStep(Eigen::Index m, Eigen::Index n, Vector d, double lambda, double lipschitz, double t);

  Eigen::Index state_dim() const override { return 2 * m_; }
  Eigen::Index param_dim() const override { return m_ * n_; }
  Vector forward(const Vector& s, const Vector& c) const override;
  std::unique_ptr<StepLinearization> linearize(const Vector& s, const Vector& c) const override;

  double momentum() const { return beta_; }
  Matrix unpack(const Vector& c) const;

 private:
  Eigen::Index m_, n_;
  Vector d_;
  double lambda_, L_, t_, beta_;
};

// Primal recovery u = Dᵀw + d from the FDPG state.
Vector fdpg_primal(const Matrix& D, const Vector& d, const Vector& state);
// Cotangents of the primal recovery: (state_bar, vec(D)_bar).
std::pair<Vector, Vector> fdpg_primal_vjp(const Matrix& D, const Vector& state, const Vector& u_bar);

}  // namespace foldcore
