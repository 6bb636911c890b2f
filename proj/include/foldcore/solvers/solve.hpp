#pragma once

#include "foldcore/diff_step.hpp"

namespace foldcore {

struct SolveReport {
  Vector x_star;
  Vector dual;  // empty unless the solver produces multipliers
  int iterations = 0;
  double fixed_point_residual = 0.0;  // ‖U(x*, c) − x*‖∞
  bool converged = false;
};

class SolveError : public Error {
 public:
  SolveError(ErrorCode code, const std::string& what, SolveReport report)
      : Error(code, what, report.fixed_point_residual), report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

double fixed_point_residual(const DifferentiableStep& step, const Vector& x, const Vector& c);

// Repeats x ← U(x, c) until ‖x_{k+1} − x_k‖∞ < tol. Throws SolveError with
// NoConvergence after max_iter, NonFinite if an iterate blows up.
SolveReport solve(const DifferentiableStep& step, const Vector& c, const Vector& x0, double tol = 1e-8,
                  int max_iter = 5000);

}  // namespace foldcore
