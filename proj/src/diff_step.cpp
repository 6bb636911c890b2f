#include "foldcore/diff_step.hpp"

#include <cmath>

namespace foldcore {

Vector DifferentiableStep::vjp_state(const Vector& x, const Vector& c, const Vector& v) const {
  return linearize(x, c)->vjp_state(v);
}

Vector DifferentiableStep::vjp_param(const Vector& x, const Vector& c, const Vector& v) const {
  return linearize(x, c)->vjp_param(v);
}

namespace {

class LambdaLinearization : public StepLinearization {
 public:
  LambdaLinearization(Vector x, Vector c, const LambdaStep::Vjp& vs, const LambdaStep::Vjp& vp)
      : x_(std::move(x)), c_(std::move(c)), vs_(vs), vp_(vp) {}
  Vector vjp_state(const Vector& v) const override { return vs_(x_, c_, v); }
  Vector vjp_param(const Vector& v) const override { return vp_(x_, c_, v); }

 private:
  Vector x_, c_;
  const LambdaStep::Vjp& vs_;
  const LambdaStep::Vjp& vp_;
};

}  // namespace

LambdaStep::LambdaStep(Eigen::Index n, Eigen::Index p, Fwd forward, Vjp vjp_state, Vjp vjp_param)
    : n_(n), p_(p), fwd_(std::move(forward)), vs_(std::move(vjp_state)), vp_(std::move(vjp_param)) {}

std::unique_ptr<StepLinearization> LambdaStep::linearize(const Vector& x, const Vector& c) const {
  return std::make_unique<LambdaLinearization>(x, c, vs_, vp_);
}

std::shared_ptr<DifferentiableStep> make_affine_step(const Matrix& A, const Matrix& B, const Vector& e) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || e.size() != A.rows())
    throw Error(ErrorCode::ShapeMismatch, "affine step: inconsistent shapes");
  return std::make_shared<LambdaStep>(
      A.rows(), B.cols(), [A, B, e](const Vector& x, const Vector& c) -> Vector { return A * x + B * c + e; },
      [A](const Vector&, const Vector&, const Vector& v) -> Vector { return A.transpose() * v; },
      [B](const Vector&, const Vector&, const Vector& v) -> Vector { return B.transpose() * v; });
}

Matrix fd_jacobian(const DifferentiableStep& step, const Vector& x, const Vector& c, Wrt wrt, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "fd_jacobian: h must be positive");
  const Eigen::Index n = step.state_dim();
  const Vector& base = wrt == Wrt::State ? x : c;
  Matrix J(n, base.size());
  for (Eigen::Index j = 0; j < base.size(); ++j) {
    const double hj = h * (1.0 + std::abs(base(j)));
    Vector plus = base, minus = base;
    plus(j) += hj;
    minus(j) -= hj;
    const Vector fp = wrt == Wrt::State ? step.forward(plus, c) : step.forward(x, plus);
    const Vector fm = wrt == Wrt::State ? step.forward(minus, c) : step.forward(x, minus);
    if (!all_finite(fp) || !all_finite(fm))
      throw Error(ErrorCode::NonFiniteProbe, "fd_jacobian probe produced non-finite output");
    J.col(j) = (fp - fm) / (plus(j) - minus(j));
  }
  return J;
}

StepJacobians assemble_jacobians(const DifferentiableStep& step, const Vector& x, const Vector& c) {
  const Eigen::Index n = step.state_dim(), p = step.param_dim();
  if (static_cast<double>(n) * static_cast<double>(p) > 1e6 || static_cast<double>(n) * n > 1e6)
    throw Error(ErrorCode::TooLarge, "assemble_jacobians: materialization guard exceeded");
  auto lin = step.linearize(x, c);
  StepJacobians jac{Matrix(n, n), Matrix(n, p)};
  Vector e = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    e(i) = 1.0;
    jac.phi.row(i) = lin->vjp_state(e).transpose();
    jac.psi.row(i) = lin->vjp_param(e).transpose();
    e(i) = 0.0;
  }
  return jac;
}

StepCheck check_step(const DifferentiableStep& step, const Vector& x, const Vector& c, double h) {
  const StepJacobians jac = assemble_jacobians(step, x, c);
  StepCheck out;
  const Matrix fs = fd_jacobian(step, x, c, Wrt::State, h);
  out.state_deviation = fs.size() ? (fs - jac.phi).cwiseAbs().maxCoeff() : 0.0;
  if (step.param_dim() > 0) {
    const Matrix fp = fd_jacobian(step, x, c, Wrt::Param, h);
    out.param_deviation = (fp - jac.psi).cwiseAbs().maxCoeff();
  }
  return out;
}

}  // namespace foldcore
