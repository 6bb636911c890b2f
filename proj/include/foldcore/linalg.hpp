#pragma once

#include "foldcore/types.hpp"

#include <functional>
#include <vector>

namespace foldcore {

// Dense LU with partial pivoting. A pivot smaller than 1e-12 times the
// largest magnitude in its original row is treated as singular.
class LuFactorization {
 public:
  explicit LuFactorization(const Matrix& a);

  Eigen::Index dim() const { return lu_.rows(); }
  Vector solve(const Vector& b) const;
  // Solves aᵀx = b with the same factors.
  Vector solve_transpose(const Vector& b) const;

 private:
  Matrix lu_;
  std::vector<Eigen::Index> perm_;
};

Vector lu_solve(const Matrix& a, const Vector& b);

// Matrix-free linear map. apply: R^dim_in -> R^dim_out, apply_transpose the
// adjoint.
struct LinearOperator {
  Eigen::Index dim_in = 0;
  Eigen::Index dim_out = 0;
  std::function<Vector(const Vector&)> apply;
  std::function<Vector(const Vector&)> apply_transpose;
};

LinearOperator as_operator(const Matrix& m);

// Largest eigenvalue magnitude by power iteration from (1, 1/2, 1/3, ...).
// Each iterate also fits a two-term recurrence so that dominant pairs
// (complex conjugate or ±λ) give the right modulus instead of oscillating.
// Throws NoConvergence carrying the last estimate.
double spectral_radius(const LinearOperator& op, int max_iter = 2000, double tol = 1e-10);

}  // namespace foldcore
