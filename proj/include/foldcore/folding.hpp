#pragma once

#include "foldcore/diff_step.hpp"
#include "foldcore/linear_solvers.hpp"
#include "foldcore/solvers/solve.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace foldcore {

enum class BackwardMethod { Lfpi, Krylov };

struct FoldingOptions {
  BackwardMethod method = BackwardMethod::Krylov;
  double backward_tol = 1e-12;
  int backward_max_iter = 20000;
  // Tolerance the forward solver is run to; backward refuses points whose
  // fixed-point residual exceeds 100 times this.
  double forward_tol = 1e-8;
};

// Black-box forward: returns x*(c), optionally warm-started.
using ForwardSolver = std::function<SolveReport(const Vector& c, const Vector* x0)>;

struct BackwardReport {
  Vector grad_c;
  Vector adjoint;  // v solving (I − Φ)ᵀv = g
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> per_iter_residuals;
};

// x*(c) from any solver, differentiated through the fixed-point conditions
// of one update step: (I − Φ) J = Ψ with Φ = ∂U/∂x, Ψ = ∂U/∂c at x*.
class FoldedLayer {
 public:
  FoldedLayer(std::shared_ptr<const DifferentiableStep> step, ForwardSolver solver, FoldingOptions options = {});

  const DifferentiableStep& step() const { return *step_; }
  std::shared_ptr<const DifferentiableStep> step_ptr() const { return step_; }
  const FoldingOptions& options() const { return options_; }
  FoldedLayer with_method(BackwardMethod method) const;

  SolveReport forward(const Vector& c, const Vector* x0 = nullptr) const;

  // gᵀ ∂x*/∂c using only VJPs of the step.
  BackwardReport backward_vjp(const Vector& c, const Vector& x_star, const Vector& g) const;
  // Same, reusing a linearization already built at (x*, c). Skips the gate.
  BackwardReport backward_vjp(const StepLinearization& lin, const Vector& g) const;

  // ∂x*/∂c from a dense solve of (I − Φ) J = Ψ.
  Matrix jacobian_dense(const Vector& c, const Vector& x_star) const;
  // J_k of the recursion J₀ = Ψ, J_{k+1} = Φ J_k + Ψ.
  Matrix unfold_jacobian(const Vector& c, const Vector& x_star, int k) const;

  // Residual gate: throws NotAFixedPoint when ‖U(x, c) − x‖∞ > factor·forward_tol.
  double check_fixed_point(const Vector& c, const Vector& x, double factor = 100.0) const;
  // Runs the forward solver and confirms its output is a fixed point to
  // 10·forward_tol.
  SolveReport verify_fixed_point(const Vector& c) const;

  // ρ(Φ) at (x*, c); the last power-iteration estimate if it did not settle.
  double estimate_rho(const Vector& c, const Vector& x_star) const;

 private:
  std::shared_ptr<const DifferentiableStep> step_;
  ForwardSolver solver_;
  FoldingOptions options_;
};

// Operator v ↦ Φᵀ v (as a reverse-mode map) for a fixed linearization.
LinearOperator phi_transpose_operator(const StepLinearization& lin, Eigen::Index n);

enum class StartMode { FixedPoint, Random };

struct TrajectoryRow {
  int iter = 0;
  double forward_rel_err = 0.0;
  double backward_rel_err = 0.0;
  double rho_estimate = 0.0;
};

struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;
  double rho = 0.0;
  double forward_tol = 0.0;
};

// Unrolls k iterations of the step from x₀ (x* itself, or uniform(0, 1)
// entries) while propagating J_{i+1} = Φ(x_i) J_i + Ψ(x_i) from J = 0, and
// logs relative L1 errors against x* and the dense reference Jacobian.
TrajectoryRecord rate_study(const FoldedLayer& layer, const Vector& c, StartMode mode, int k, uint64_t seed = 0);

// Geometric-mean ratio of successive entries over the last half of a
// positive sequence.
double decay_ratio(const std::vector<double>& errors);

}  // namespace foldcore
