#pragma once

#include "foldcore/types.hpp"

namespace foldcore {

// min ½xᵀQx + pᵀx  s.t.  Ax = b, Gx ≤ h.
struct QpGeneral {
  Matrix Q;
  Vector p;
  Matrix A;
  Vector b;
  Matrix G;
  Vector h;

  Eigen::Index n() const { return Q.rows(); }
  void validate() const;
};

// min ½xᵀQx + pᵀx  s.t.  Ax = b, x ≥ 0.
struct QpStandard {
  Matrix Q;
  Vector p;
  Matrix A;
  Vector b;

  Eigen::Index n() const { return Q.rows(); }
  Eigen::Index m() const { return A.rows(); }
  void validate() const;
};

// Cotangent (adjoint) of standard-form data.
struct QpStandardCotangent {
  Matrix Q;
  Vector p;
  Matrix A;
  Vector b;
  static QpStandardCotangent zeros_like(const QpStandard& qp);
};

struct QpGeneralCotangent {
  Matrix Q;
  Vector p;
  Matrix A;
  Vector b;
  Matrix G;
  Vector h;
  static QpGeneralCotangent zeros_like(const QpGeneral& qp);
};

// Standard form over z = [x⁺; x⁻; s] with slack s = h − Gx:
//   Q_s = [[Q, −Q, 0], [−Q, Q, 0], [0, 0, 0]], p_s = [p; −p; 0],
//   A_s = [[A, −A, 0], [G, −G, I]], b_s = [b; h].
struct StandardConversion {
  QpStandard standard;
  Eigen::Index n = 0;     // original variables
  Eigen::Index m_in = 0;  // slack count

  Vector recover(const Vector& z) const;
  // Cotangent on z induced by a cotangent on the recovered x.
  Vector recover_vjp(const Vector& x_bar) const;
  QpGeneralCotangent pullback(const QpStandardCotangent& bar) const;
  // Lifts a general-form solution to standard form. Both split halves are
  // offset by `split_offset` so that neither sits on its bound.
  Vector lift(const Vector& x, const QpGeneral& gp, double split_offset) const;
};

StandardConversion qp_general_to_standard(const QpGeneral& gp);

struct QpSolution {
  Vector x;
  Vector eq_multipliers;    // ν with Qx + p + Aᵀν + Gᵀμ = 0
  Vector ineq_multipliers;  // μ ≥ 0
  int iterations = 0;
};

// Dual active-set (Goldfarb–Idnani) method for strictly convex QPs.
// Active-set subproblems are re-solved from scratch each step with a
// Cholesky factor of Q and a QR of the transformed active normals, which is
// plenty at these sizes. Throws SubproblemInfeasible when the constraints
// admit no point, InvalidArgument when Q is not positive definite.
QpSolution solve_qp_active_set(const QpGeneral& qp);

// General form of a standard QP: the bounds x ≥ 0 become −x ≤ 0.
QpGeneral standard_as_general(const QpStandard& qp);

// KKT multipliers of a standard-form point: ν, and ζ ≥ 0 on the bounds,
// from a least-squares solve of Qx + p + Aᵀν − ζ = 0 with ζ zero off the
// active set ({x_i ≤ active_tol}).
struct StandardMultipliers {
  Vector nu;
  Vector zeta;
  double stationarity = 0.0;
};
StandardMultipliers standard_multipliers(const QpStandard& qp, const Vector& x, double active_tol = 1e-12);

// Residuals of the KKT conditions of a general QP at (x, ν, μ): max of
// stationarity, primal infeasibility, dual infeasibility and complementarity.
double kkt_residual(const QpGeneral& qp, const Vector& x, const Vector& nu, const Vector& mu);

}  // namespace foldcore
