#include "foldcore/learning/losses.hpp"

#include <cmath>

namespace foldcore {

LossValue mse(const Vector& pred, const Vector& target) {
  require_size(pred.size(), target.size(), "mse target");
  if (pred.size() == 0) throw Error(ErrorCode::InvalidArgument, "mse of empty vectors");
  const Vector d = pred - target;
  const double n = static_cast<double>(pred.size());
  return {d.squaredNorm() / n, 2.0 * d / n};
}

LossValue binary_cross_entropy(const Vector& prob, const Vector& target) {
  require_size(prob.size(), target.size(), "bce target");
  if (prob.size() == 0) throw Error(ErrorCode::InvalidArgument, "bce of empty vectors");
  constexpr double eps = 1e-7;
  const double n = static_cast<double>(prob.size());
  LossValue out;
  out.grad = Vector::Zero(prob.size());
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob(i), eps, 1.0 - eps);
    const double t = target(i);
    out.value -= (t * std::log(p) + (1.0 - t) * std::log(1.0 - p)) / n;
    // Clipped entries get no gradient, as with a clamp in front of the log.
    if (prob(i) > eps && prob(i) < 1.0 - eps) out.grad(i) = (-t / p + (1.0 - t) / (1.0 - p)) / n;
  }
  return out;
}

RegretValue regret(const Vector& c_hat, const Vector& c_bar, const DecisionMap& map, const DecisionObjective& f,
                   bool with_grad, const Vector* x_true) {
  require_size(c_hat.size(), c_bar.size(), "regret parameters");
  RegretValue out;
  out.decision = map.decide(c_hat);
  const Vector xt = x_true ? *x_true : map.decide(c_bar);
  out.regret = f.value(out.decision, c_bar) - f.value(xt, c_bar);
  if (with_grad) out.grad = map.decide_vjp(c_hat, out.decision, f.grad_x(out.decision, c_bar));
  return out;
}

}  // namespace foldcore
