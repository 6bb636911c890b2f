#pragma once

#include "foldcore/folding.hpp"

#include <functional>
#include <memory>

namespace foldcore {

struct LossValue {
  double value = 0.0;
  Vector grad;  // with respect to the prediction
};

// mean((pred − target)²)
LossValue mse(const Vector& pred, const Vector& target);
// Mean binary cross-entropy of probabilities clipped to [1e-7, 1 − 1e-7].
LossValue binary_cross_entropy(const Vector& prob, const Vector& target);

// Decision as a function of predicted parameters, with its VJP. Wraps a
// folded layer together with how c enters it and how the decision is read
// off the fixed point.
class DecisionMap {
 public:
  virtual ~DecisionMap() = default;
  virtual Eigen::Index param_dim() const = 0;
  virtual Eigen::Index decision_dim() const = 0;
  virtual Vector decide(const Vector& c) const = 0;
  // gᵀ ∂decision/∂c at c, with `decision` the output of decide(c).
  virtual Vector decide_vjp(const Vector& c, const Vector& decision, const Vector& g) const = 0;
};

// Decision = the layer's fixed point, parameters passed straight through.
class FoldedDecision : public DecisionMap {
 public:
  explicit FoldedDecision(FoldedLayer layer) : layer_(std::move(layer)) {}
  Eigen::Index param_dim() const override { return layer_.step().param_dim(); }
  Eigen::Index decision_dim() const override { return layer_.step().state_dim(); }
  Vector decide(const Vector& c) const override { return layer_.forward(c).x_star; }
  Vector decide_vjp(const Vector& c, const Vector& x, const Vector& g) const override {
    return layer_.backward_vjp(c, x, g).grad_c;
  }

 private:
  FoldedLayer layer_;
};

// Objective f(x, c) in minimization form, with ∇ₓf.
struct DecisionObjective {
  std::function<double(const Vector& x, const Vector& c)> value;
  std::function<Vector(const Vector& x, const Vector& c)> grad_x;
};

struct RegretValue {
  double regret = 0.0;
  Vector grad;        // ∂regret/∂ĉ (empty when not requested)
  Vector decision;    // x*(ĉ)
};

// f(x*(ĉ), c̄) − f(x*(c̄), c̄). x_true may carry a cached x*(c̄).
RegretValue regret(const Vector& c_hat, const Vector& c_bar, const DecisionMap& map, const DecisionObjective& f,
                   bool with_grad = true, const Vector* x_true = nullptr);

}  // namespace foldcore
