#pragma once

#include "foldcore/types.hpp"

#include <cstdint>
#include <memory>

namespace foldcore {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double lr = 1e-2;
  int batch_size = 32;
  int epochs = 5;
  OptimizerKind optimizer = OptimizerKind::Adam;
  uint64_t seed = 0;
  void validate() const;
};

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // params ← params − update(grad)
  virtual void step(Vector& params, const Vector& grad) = 0;
};

class Sgd : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(Vector& params, const Vector& grad) override;

 private:
  double lr_;
};

class Adam : public Optimizer {
 public:
  Adam(Eigen::Index dim, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Vector& params, const Vector& grad) override;

 private:
  double lr_, b1_, b2_, eps_;
  Vector m_, v_;
  long t_ = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& cfg, Eigen::Index dim);

}  // namespace foldcore
