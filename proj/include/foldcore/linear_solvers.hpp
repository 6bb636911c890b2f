#pragma once

#include "foldcore/linalg.hpp"

#include <vector>

namespace foldcore {

struct LinSolveReport {
  Vector solution;
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
  std::vector<double> per_iter_residuals;
};

// Thrown by solvers that want to hand back their partial report.
class LinSolveError : public Error {
 public:
  LinSolveError(ErrorCode code, const std::string& what, LinSolveReport report,
                std::optional<double> estimate = std::nullopt)
      : Error(code, what, estimate), report_(std::move(report)) {}
  const LinSolveReport& report() const { return report_; }

 private:
  LinSolveReport report_;
};

// z <- B z + b until the successive difference drops below tol (infinity
// norm). per_iter_residuals records those differences. residual_norm is the
// true residual ‖z − Bz − b‖∞ at return. Throws Divergence once ‖z‖∞ > 1e12.
LinSolveReport lfpi(const LinearOperator& B, const Vector& b, const Vector& z0, double tol, int max_iter);

// Restarted GMRES on A x = b, restart length min(30, n). Solves to
// ‖Ax − b‖₂ ≤ tol (1 + ‖b‖₂); per_iter_residuals holds the residual estimate
// after each inner step. residual_norm is the true residual ‖Ax − b‖∞.
LinSolveReport krylov_solve(const LinearOperator& A, const Vector& b, const Vector& x0, double tol,
                            int max_iter);

// −log of the geometric mean of the last ⌈(N−1)/2⌉ successive ratios.
double empirical_rate(const std::vector<double>& per_iter_residuals);

}  // namespace foldcore
