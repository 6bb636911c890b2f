#pragma once

#include "foldcore/diff_step.hpp"
#include "foldcore/solvers/objectives.hpp"

namespace foldcore {

// x⁺ = P(x − α∇f(x, c))
class PgdStep : public DifferentiableStep {
 public:
  PgdStep(std::shared_ptr<const SmoothObjective> f, std::shared_ptr<const Projector> proj, double alpha);

  Eigen::Index state_dim() const override { return f_->dim(); }
  Eigen::Index param_dim() const override { return f_->param_dim(); }
  Vector forward(const Vector& x, const Vector& c) const override;
  std::unique_ptr<StepLinearization> linearize(const Vector& x, const Vector& c) const override;

  double alpha() const { return alpha_; }
  const SmoothObjective& objective() const { return *f_; }
  const Projector& projector() const { return *proj_; }

 private:
  Vector gradient_point(const Vector& x, const Vector& c) const;

  std::shared_ptr<const SmoothObjective> f_;
  std::shared_ptr<const Projector> proj_;
  double alpha_;
};

// x⁺ = Prox_{αg}(x − α∇f(x, c))
class ProxGdStep : public DifferentiableStep {
 public:
  ProxGdStep(std::shared_ptr<const SmoothObjective> f, std::shared_ptr<const ProxOperator> g, double alpha);

  Eigen::Index state_dim() const override { return f_->dim(); }
  Eigen::Index param_dim() const override { return f_->param_dim(); }
  Vector forward(const Vector& x, const Vector& c) const override;
  std::unique_ptr<StepLinearization> linearize(const Vector& x, const Vector& c) const override;

 private:
  Vector gradient_point(const Vector& x, const Vector& c) const;

  std::shared_ptr<const SmoothObjective> f_;
  std::shared_ptr<const ProxOperator> g_;
  double alpha_;
};

}  // namespace foldcore
