#pragma once

#include "foldcore/linalg.hpp"

#include <functional>
#include <memory>

namespace foldcore {

// vᵀ∂U/∂x and vᵀ∂U/∂c at one fixed (x, c). Built once per point so that
// repeated products (a backward solve) reuse factorizations.
class StepLinearization {
 public:
  virtual ~StepLinearization() = default;
  virtual Vector vjp_state(const Vector& v) const = 0;
  virtual Vector vjp_param(const Vector& v) const = 0;
};

// One solver update x⁺ = U(x, c).
class DifferentiableStep {
 public:
  virtual ~DifferentiableStep() = default;
  virtual Eigen::Index state_dim() const = 0;
  virtual Eigen::Index param_dim() const = 0;
  virtual Vector forward(const Vector& x, const Vector& c) const = 0;
  virtual std::unique_ptr<StepLinearization> linearize(const Vector& x, const Vector& c) const = 0;

  Vector vjp_state(const Vector& x, const Vector& c, const Vector& v) const;
  Vector vjp_param(const Vector& x, const Vector& c, const Vector& v) const;
};

// Step assembled from closures; handy for toy maps and fixtures.
class LambdaStep : public DifferentiableStep {
 public:
  using Fwd = std::function<Vector(const Vector&, const Vector&)>;
  using Vjp = std::function<Vector(const Vector&, const Vector&, const Vector&)>;

  LambdaStep(Eigen::Index n, Eigen::Index p, Fwd forward, Vjp vjp_state, Vjp vjp_param);

  Eigen::Index state_dim() const override { return n_; }
  Eigen::Index param_dim() const override { return p_; }
  Vector forward(const Vector& x, const Vector& c) const override { return fwd_(x, c); }
  std::unique_ptr<StepLinearization> linearize(const Vector& x, const Vector& c) const override;

 private:
  Eigen::Index n_, p_;
  Fwd fwd_;
  Vjp vs_, vp_;
};

// U(x, c) = A x + B c + e, the linear toy used throughout the tests.
std::shared_ptr<DifferentiableStep> make_affine_step(const Matrix& A, const Matrix& B, const Vector& e);

enum class Wrt { State, Param };

// Central differences; column j uses h_j = h (1 + |entry_j|).
Matrix fd_jacobian(const DifferentiableStep& step, const Vector& x, const Vector& c, Wrt wrt, double h = 1e-6);

struct StepJacobians {
  Matrix phi;  // n × n
  Matrix psi;  // n × p
};

// Materializes Φ and Ψ row by row from unit-vector VJPs. Refuses n·p > 1e6.
StepJacobians assemble_jacobians(const DifferentiableStep& step, const Vector& x, const Vector& c);

struct StepCheck {
  double state_deviation = 0.0;
  double param_deviation = 0.0;
  double max_deviation() const { return std::max(state_deviation, param_deviation); }
  bool passed(double threshold = 1e-4) const { return max_deviation() < threshold; }
};

// Max absolute entry difference between assembled and finite-difference
// Jacobians.
StepCheck check_step(const DifferentiableStep& step, const Vector& x, const Vector& c, double h = 1e-6);

}  // namespace foldcore
