#include "foldcore/diff_step.hpp"
#include "foldcore/prox_proj.hpp"
#include "foldcore/rng.hpp"
#include "foldcore/solvers/objectives.hpp"
#include "foldcore/solvers/steps.hpp"

#include <gtest/gtest.h>

using namespace foldcore;

namespace {

std::shared_ptr<DifferentiableStep> scalar_half_step() {
  Matrix A(1, 1), B(1, 1);
  A(0, 0) = 0.5;
  B(0, 0) = 1.0;
  return make_affine_step(A, B, Vector::Zero(1));
}

std::shared_ptr<DifferentiableStep> box_pgd(Eigen::Index n, double alpha) {
  return std::make_shared<PgdStep>(std::make_shared<SquaredDistance>(n),
                                   std::make_shared<BoxProjector>(BoxSpec::uniform(n, 0.0, 1.0)), alpha);
}

}  // namespace

TEST(FdJacobian, IdentityInState) {
  const auto step = make_affine_step(Matrix::Identity(3, 3), Matrix::Zero(3, 2), Vector::Zero(3));
  const Matrix J = fd_jacobian(*step, Vector::Ones(3), Vector::Zero(2), Wrt::State);
  EXPECT_LE((J - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FdJacobian, ConstantInState) {
  const auto step = make_affine_step(Matrix::Zero(2, 2), Matrix::Identity(2, 2), Vector::Zero(2));
  Vector x(2), c(2);
  x << 0.3, -1;
  c << 2, 5;
  EXPECT_LE(fd_jacobian(*step, x, c, Wrt::State).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((fd_jacobian(*step, x, c, Wrt::Param) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FdJacobian, ScalarAffine) {
  const auto step = scalar_half_step();
  EXPECT_NEAR(fd_jacobian(*step, Vector::Ones(1), Vector::Ones(1), Wrt::State)(0, 0), 0.5, 1e-9);
  EXPECT_NEAR(fd_jacobian(*step, Vector::Ones(1), Vector::Ones(1), Wrt::Param)(0, 0), 1.0, 1e-9);
}

TEST(FdJacobian, NonFiniteProbe) {
  LambdaStep step(
      1, 1, [](const Vector& x, const Vector&) { return Vector(x.array().log()); },
      [](const Vector&, const Vector&, const Vector& v) { return v; },
      [](const Vector&, const Vector&, const Vector& v) { return v; });
  try {
    fd_jacobian(step, Vector::Constant(1, -1.0), Vector::Zero(1), Wrt::State);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteProbe);
  }
}

TEST(AssembleJacobians, ScalarAffine) {
  const auto jac = assemble_jacobians(*scalar_half_step(), Vector::Ones(1), Vector::Ones(1));
  EXPECT_DOUBLE_EQ(jac.phi(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(jac.psi(0, 0), 1.0);
}

TEST(AssembleJacobians, Swap) {
  Matrix A = Matrix::Zero(2, 2);
  A(0, 1) = A(1, 0) = 1.0;
  const auto step = make_affine_step(A, Matrix::Zero(2, 1), Vector::Zero(2));
  const auto jac = assemble_jacobians(*step, Vector::Ones(2), Vector::Zero(1));
  EXPECT_EQ(jac.phi, A);
  EXPECT_EQ(jac.psi, Matrix::Zero(2, 1));
}

TEST(AssembleJacobians, BoxPgdInterior) {
  const double alpha = 0.3;
  const auto step = box_pgd(3, alpha);
  Vector x(3), c(3);
  x << 0.2, 0.5, 0.7;
  c << 0.4, 0.6, 0.1;
  const auto jac = assemble_jacobians(*step, x, c);
  EXPECT_LE((jac.phi - (1 - alpha) * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((jac.psi - alpha * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((jac.phi - fd_jacobian(*step, x, c, Wrt::State)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(AssembleJacobians, TooLarge) {
  const Eigen::Index n = 1001;
  const auto step = make_affine_step(Matrix::Zero(n, n), Matrix::Zero(n, 1), Vector::Zero(n));
  try {
    assemble_jacobians(*step, Vector::Zero(n), Vector::Zero(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooLarge);
  }
}

TEST(AssembleJacobians, OperatorAgreesWithVjp) {
  Rng rng(6);
  const Matrix A = rng.normal_matrix(4, 4), B = rng.normal_matrix(4, 3);
  const auto step = make_affine_step(A, B, rng.normal_vector(4));
  const Vector x = rng.normal_vector(4), c = rng.normal_vector(3);
  const auto jac = assemble_jacobians(*step, x, c);
  for (int t = 0; t < 10; ++t) {
    const Vector v = rng.normal_vector(4);
    EXPECT_LE((jac.phi.transpose() * v - step->vjp_state(x, c, v)).norm(), 1e-12);
    EXPECT_LE((jac.psi.transpose() * v - step->vjp_param(x, c, v)).norm(), 1e-12);
  }
}

TEST(CheckStep, IdentityStep) {
  const auto step = make_affine_step(Matrix::Identity(2, 2), Matrix::Zero(2, 2), Vector::Zero(2));
  const StepCheck r = check_step(*step, Vector::Ones(2), Vector::Ones(2));
  EXPECT_LE(r.max_deviation(), 1e-9);
  EXPECT_TRUE(r.passed());
}

TEST(CheckStep, SoftThresholdAwayFromKinks) {
  const double lambda = 0.4;
  LambdaStep step(
      3, 1, [lambda](const Vector& x, const Vector&) { return soft_threshold(x, lambda); },
      [lambda](const Vector& x, const Vector&, const Vector& v) { return soft_threshold_vjp(x, lambda, v); },
      [](const Vector&, const Vector&, const Vector&) { return Vector(Vector::Zero(1)); });
  Vector x(3);
  x << 1.2, -0.9, 2.0;
  EXPECT_LT(check_step(step, x, Vector::Zero(1)).max_deviation(), 1e-6);
}

TEST(CheckStep, DetectsWrongVjp) {
  LambdaStep step(
      2, 1, [](const Vector& x, const Vector& c) { return Vector(0.5 * x + Vector::Constant(2, c(0))); },
      [](const Vector&, const Vector&, const Vector& v) { return Vector(0.6 * v); },
      [](const Vector&, const Vector&, const Vector& v) { return Vector::Constant(1, v.sum()); });
  EXPECT_FALSE(check_step(step, Vector::Zero(2), Vector::Zero(1)).passed());
}

TEST(VjpProperties, LinearityAndAdjointness) {
  Rng rng(17);
  const auto step = box_pgd(5, 0.4);
  Vector x = rng.uniform_vector(5, 0.1, 0.9), c = rng.uniform_vector(5, -0.5, 1.5);
  const double a = rng.normal(), b = rng.normal();
  const Vector v = rng.normal_vector(5), w = rng.normal_vector(5);
  EXPECT_LE((step->vjp_state(x, c, a * v + b * w) - a * step->vjp_state(x, c, v) - b * step->vjp_state(x, c, w)).norm(),
            1e-10);
  EXPECT_LE((step->vjp_param(x, c, a * v + b * w) - a * step->vjp_param(x, c, v) - b * step->vjp_param(x, c, w)).norm(),
            1e-10);
  // ⟨v, (∂U/∂x) u⟩ from a forward difference against ⟨vjp_state(v), u⟩.
  const Vector u = rng.normal_vector(5);
  const double h = 1e-7;
  const double dir = v.dot((step->forward(x + h * u, c) - step->forward(x, c)) / h);
  EXPECT_NEAR(dir, step->vjp_state(x, c, v).dot(u), 1e-4);
}
