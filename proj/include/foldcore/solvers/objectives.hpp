#pragma once

#include "foldcore/prox_proj.hpp"
#include "foldcore/qp.hpp"

#include <functional>
#include <memory>

namespace foldcore {

// f(x, c) with the derivatives a gradient step needs.
class SmoothObjective {
 public:
  virtual ~SmoothObjective() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Eigen::Index param_dim() const = 0;
  virtual double value(const Vector& x, const Vector& c) const = 0;
  virtual Vector gradient(const Vector& x, const Vector& c) const = 0;
  // ∇²ₓₓf · w
  virtual Vector hessian_vjp(const Vector& x, const Vector& c, const Vector& w) const = 0;
  // wᵀ ∂(∇ₓf)/∂c
  virtual Vector mixed_vjp(const Vector& x, const Vector& c, const Vector& w) const = 0;
};

// ½‖x − c‖²
class SquaredDistance : public SmoothObjective {
 public:
  explicit SquaredDistance(Eigen::Index n) : n_(n) {}
  Eigen::Index dim() const override { return n_; }
  Eigen::Index param_dim() const override { return n_; }
  double value(const Vector& x, const Vector& c) const override;
  Vector gradient(const Vector& x, const Vector& c) const override;
  Vector hessian_vjp(const Vector& x, const Vector& c, const Vector& w) const override;
  Vector mixed_vjp(const Vector& x, const Vector& c, const Vector& w) const override;

 private:
  Eigen::Index n_;
};

// ½xᵀQx + cᵀx with fixed Q; the linear term is the parameter.
class QuadraticLinearParam : public SmoothObjective {
 public:
  explicit QuadraticLinearParam(Matrix Q) : Q_(std::move(Q)) {}
  Eigen::Index dim() const override { return Q_.rows(); }
  Eigen::Index param_dim() const override { return Q_.rows(); }
  double value(const Vector& x, const Vector& c) const override;
  Vector gradient(const Vector& x, const Vector& c) const override;
  Vector hessian_vjp(const Vector& x, const Vector& c, const Vector& w) const override;
  Vector mixed_vjp(const Vector& x, const Vector& c, const Vector& w) const override;

 private:
  Matrix Q_;
};

// −cᵀx + Σ xᵢ log xᵢ, the entropy-smoothed linear objective of the top-k
// layer. log and 1/x are evaluated at max(x, 1e-12).
class EntropicLinear : public SmoothObjective {
 public:
  explicit EntropicLinear(Eigen::Index n) : n_(n) {}
  Eigen::Index dim() const override { return n_; }
  Eigen::Index param_dim() const override { return n_; }
  double value(const Vector& x, const Vector& c) const override;
  Vector gradient(const Vector& x, const Vector& c) const override;
  Vector hessian_vjp(const Vector& x, const Vector& c, const Vector& w) const override;
  Vector mixed_vjp(const Vector& x, const Vector& c, const Vector& w) const override;

 private:
  Eigen::Index n_;
};

// Euclidean projection with its VJP at a given input.
class Projector {
 public:
  using Vjp = std::function<Vector(const Vector&)>;
  virtual ~Projector() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Vector project(const Vector& s) const = 0;
  virtual Vjp linearize(const Vector& s) const = 0;
};

class BoxProjector : public Projector {
 public:
  explicit BoxProjector(BoxSpec box) : box_(std::move(box)) {}
  Eigen::Index dim() const override { return box_.lo.size(); }
  Vector project(const Vector& s) const override { return project_box(s, box_); }
  Vjp linearize(const Vector& s) const override;

 private:
  BoxSpec box_;
};

class NonnegProjector : public Projector {
 public:
  explicit NonnegProjector(Eigen::Index n) : n_(n) {}
  Eigen::Index dim() const override { return n_; }
  Vector project(const Vector& s) const override { return project_nonneg(s); }
  Vjp linearize(const Vector& s) const override;

 private:
  Eigen::Index n_;
};

// Product of capped simplices over consecutive blocks. A block whose
// projection has no free coordinate contributes a zero VJP (clamped
// convention).
class CappedSimplexProjector : public Projector {
 public:
  explicit CappedSimplexProjector(std::vector<CappedSimplexSpec> blocks);
  Eigen::Index dim() const override { return dim_; }
  Vector project(const Vector& s) const override;
  Vjp linearize(const Vector& s) const override;

 private:
  std::vector<CappedSimplexSpec> blocks_;
  Eigen::Index dim_ = 0;
};

// Prox_{αg} and its VJP with respect to the input.
class ProxOperator {
 public:
  using Vjp = std::function<Vector(const Vector&)>;
  virtual ~ProxOperator() = default;
  virtual Vector prox(const Vector& s, double alpha) const = 0;
  virtual Vjp linearize(const Vector& s, double alpha) const = 0;
};

// g = λ‖·‖₁
class L1Prox : public ProxOperator {
 public:
  explicit L1Prox(double lambda);
  Vector prox(const Vector& s, double alpha) const override { return soft_threshold(s, alpha * lambda_); }
  Vjp linearize(const Vector& s, double alpha) const override;

 private:
  double lambda_;
};

}  // namespace foldcore
