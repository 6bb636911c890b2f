#include "foldcore/solvers/steps.hpp"

namespace foldcore {

namespace {

// Gradient-step-then-map linearization shared by PGD and proximal GD:
// with S = x − α∇f and w = (∂map)ᵀv, the state VJP is w − α∇²f w and the
// parameter VJP is −α wᵀ∂(∇f)/∂c.
class GradientMapLinearization : public StepLinearization {
 public:
  GradientMapLinearization(const SmoothObjective& f, Vector x, Vector c, double alpha,
                           std::function<Vector(const Vector&)> map_vjp)
      : f_(f), x_(std::move(x)), c_(std::move(c)), alpha_(alpha), map_vjp_(std::move(map_vjp)) {}

  Vector vjp_state(const Vector& v) const override {
    const Vector w = map_vjp_(v);
    return w - alpha_ * f_.hessian_vjp(x_, c_, w);
  }
  Vector vjp_param(const Vector& v) const override { return -alpha_ * f_.mixed_vjp(x_, c_, map_vjp_(v)); }

 private:
  const SmoothObjective& f_;
  Vector x_, c_;
  double alpha_;
  std::function<Vector(const Vector&)> map_vjp_;
};

void check_alpha(double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
}

Vector gradient_step(const SmoothObjective& f, const Vector& x, const Vector& c, double alpha) {
  require_size(x.size(), f.dim(), "step state");
  require_size(c.size(), f.param_dim(), "step parameters");
  const Vector g = f.gradient(x, c);
  if (!all_finite(g)) throw Error(ErrorCode::NonFiniteGradient, "objective gradient is not finite");
  return x - alpha * g;
}

}  // namespace

PgdStep::PgdStep(std::shared_ptr<const SmoothObjective> f, std::shared_ptr<const Projector> proj, double alpha)
    : f_(std::move(f)), proj_(std::move(proj)), alpha_(alpha) {
  check_alpha(alpha);
  if (f_->dim() != proj_->dim()) throw Error(ErrorCode::ShapeMismatch, "pgd: objective and projector dims differ");
}

Vector PgdStep::gradient_point(const Vector& x, const Vector& c) const { return gradient_step(*f_, x, c, alpha_); }

Vector PgdStep::forward(const Vector& x, const Vector& c) const { return proj_->project(gradient_point(x, c)); }

std::unique_ptr<StepLinearization> PgdStep::linearize(const Vector& x, const Vector& c) const {
  return std::make_unique<GradientMapLinearization>(*f_, x, c, alpha_, proj_->linearize(gradient_point(x, c)));
}

ProxGdStep::ProxGdStep(std::shared_ptr<const SmoothObjective> f, std::shared_ptr<const ProxOperator> g, double alpha)
    : f_(std::move(f)), g_(std::move(g)), alpha_(alpha) {
  check_alpha(alpha);
}

Vector ProxGdStep::gradient_point(const Vector& x, const Vector& c) const {
  return gradient_step(*f_, x, c, alpha_);
}

Vector ProxGdStep::forward(const Vector& x, const Vector& c) const { return g_->prox(gradient_point(x, c), alpha_); }

std::unique_ptr<StepLinearization> ProxGdStep::linearize(const Vector& x, const Vector& c) const {
  return std::make_unique<GradientMapLinearization>(*f_, x, c, alpha_, g_->linearize(gradient_point(x, c), alpha_));
}

}  // namespace foldcore
