#pragma once

#include "foldcore/folding.hpp"
#include "foldcore/learning/losses.hpp"
#include "foldcore/solvers/steps.hpp"

namespace foldcore {

// Smoothed top-k indicator x*(c) = argmin −cᵀx + Σ xᵢ log xᵢ over
// {0 ≤ x ≤ 1, Σx = k}. Stationarity gives xᵢ = min(1, e^{cᵢ − 1 − τ}); τ is
// found by bisection to machine precision.
Vector topk_forward(const Vector& c, double k);

// Step size giving a contraction at x*: the smallest unclamped coordinate.
double topk_step_size(const Vector& x_star);

std::shared_ptr<PgdStep> make_topk_step(Eigen::Index n, double k, double alpha);

// Folded PGD layer with the closed-form forward and a fixed step size.
FoldedLayer make_topk_layer(Eigen::Index n, double k, double alpha, FoldingOptions options = {});

// Backward settings for training. Once scores separate, the condition number
// of (I − Φ) grows like max x*/min x* whatever the step size, and GMRES can
// stall just above its tolerance; a short iteration cap lets decide_vjp fall
// back to a dense solve quickly.
FoldingOptions topk_training_folding();

// Top-k layer whose step size adapts to each input (see topk_step_size).
class TopkDecision : public DecisionMap {
 public:
  TopkDecision(Eigen::Index n, double k, FoldingOptions options = topk_training_folding());
  Eigen::Index param_dim() const override { return n_; }
  Eigen::Index decision_dim() const override { return n_; }
  Vector decide(const Vector& c) const override { return topk_forward(c, k_); }
  Vector decide_vjp(const Vector& c, const Vector& x, const Vector& g) const override;
  FoldedLayer layer_at(const Vector& x_star) const;

 private:
  Eigen::Index n_;
  double k_;
  FoldingOptions options_;
};

}  // namespace foldcore
