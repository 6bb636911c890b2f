#include "foldcore/learning/optim.hpp"

#include <cmath>

namespace foldcore {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "train config: lr must be positive");
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "train config: batch_size must be at least 1");
  if (epochs < 0) throw Error(ErrorCode::InvalidArgument, "train config: epochs must be non-negative");
}

void Sgd::step(Vector& params, const Vector& grad) {
  require_size(grad.size(), params.size(), "sgd gradient");
  params -= lr_ * grad;
}

Adam::Adam(Eigen::Index dim, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(Vector::Zero(dim)), v_(Vector::Zero(dim)) {}

void Adam::step(Vector& params, const Vector& grad) {
  require_size(grad.size(), m_.size(), "adam gradient");
  require_size(params.size(), m_.size(), "adam parameters");
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg, Eigen::Index dim) {
  cfg.validate();
  if (cfg.optimizer == OptimizerKind::Sgd) return std::make_unique<Sgd>(cfg.lr);
  return std::make_unique<Adam>(dim, cfg.lr);
}

}  // namespace foldcore
