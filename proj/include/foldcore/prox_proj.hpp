#pragma once

#include "foldcore/types.hpp"

namespace foldcore {

struct BoxSpec {
  Vector lo;
  Vector hi;
  static BoxSpec uniform(Eigen::Index n, double lo, double hi);
};

struct CappedSimplexSpec {
  double k = 1.0;
  Eigen::Index dim = 0;
};

Vector soft_threshold(const Vector& x, double lambda);
// Passes v where |x_i| > λ.
Vector soft_threshold_vjp(const Vector& x, double lambda, const Vector& v);

Vector project_box(const Vector& x, const BoxSpec& box);
// Passes v where lo < x_i < hi strictly.
Vector project_box_vjp(const Vector& x, const BoxSpec& box, const Vector& v);

Vector project_nonneg(const Vector& x);
Vector project_nonneg_vjp(const Vector& x, const Vector& v);

// argmin ‖y − x‖ over {0 ≤ y ≤ 1, Σy = k}: bisection on the shift τ in
// y = clamp(x − τ, 0, 1), then an exact solve for τ on the final free set.
Vector project_capped_simplex(const Vector& x, const CappedSimplexSpec& spec);
// Free set F = {0 < y_i < 1}; returns mask_F(v − mean_F v). Throws
// DegenerateFreeSet when F is empty.
Vector project_capped_simplex_vjp(const Vector& x, const CappedSimplexSpec& spec, const Vector& v);

}  // namespace foldcore
