#pragma once

#include "foldcore/folding.hpp"
#include "foldcore/rng.hpp"
#include "foldcore/solvers/admm_qp.hpp"

namespace foldcore {

// Strictly convex standard-form QP with a feasible constraint set:
// Q = MᵀM + 0.5 I, A normal, b = A x₀ for a nonnegative x₀ with some zeros
// and at least m + 1 positive entries.
QpStandard random_standard_qp(Rng& rng, Eigen::Index n, Eigen::Index m);

struct AdmmLayerOptions {
  double rho = 1.0;
  // Solve by the active-set method and place the state at the exact ADMM
  // fixed point instead of iterating ADMM.
  bool exact_forward = false;
  double forward_tol = 1e-12;
  int forward_max_iter = 500000;
  FoldingOptions folding{};
};

// x*(p) of a standard-form QP whose linear term is the parameter, solved by
// ADMM and folded through the ADMM update. State is (x, z, u).
class AdmmQpLayer {
 public:
  explicit AdmmQpLayer(QpStandard base, AdmmLayerOptions options = {});

  const FoldedLayer& layer() const { return layer_; }
  const QpStandard& base() const { return base_; }
  Eigen::Index n() const { return base_.n(); }
  // The decision is the z block, which is nonnegative by construction.
  Vector primal(const Vector& state) const { return state.segment(n(), n()); }
  Vector state_cotangent(const Vector& x_bar) const;

 private:
  QpStandard base_;
  FoldedLayer layer_;
};

}  // namespace foldcore
