#include "foldcore/diff_step.hpp"
#include "foldcore/prox_proj.hpp"
#include "foldcore/rng.hpp"
#include "foldcore/solvers/objectives.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace foldcore;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(v.size());
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

void expect_vec_near(const Vector& a, const Vector& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_NEAR(a(i), b(i), tol) << "entry " << i;
}

// Jacobian of a map R^n -> R^n from its VJP, row by row.
Matrix jac_from_vjp(const std::function<Vector(const Vector&)>& vjp, Eigen::Index n) {
  Matrix J(n, n);
  for (Eigen::Index i = 0; i < n; ++i) J.row(i) = vjp(Vector::Unit(n, i)).transpose();
  return J;
}

}  // namespace

TEST(SoftThreshold, Formula) { expect_vec_near(soft_threshold(vec({1.0, -0.2, -2.0}), 0.5), vec({0.5, 0, -1.5}), 1e-15); }
TEST(SoftThreshold, ZeroLambdaIdentity) { EXPECT_EQ(soft_threshold(vec({1, -3, 0.2}), 0.0), vec({1, -3, 0.2})); }
TEST(SoftThreshold, BelowThreshold) { EXPECT_EQ(soft_threshold(vec({0.3}), 0.5)(0), 0.0); }
TEST(SoftThreshold, VjpMask) {
  EXPECT_EQ(soft_threshold_vjp(vec({1.0, -0.2, -2.0}), 0.5, vec({1, 1, 1})), vec({1, 0, 1}));
  EXPECT_EQ(soft_threshold_vjp(vec({1.0, -0.2, -2.0}), 0.0, vec({4, 5, 6})), vec({4, 5, 6}));
}
TEST(SoftThreshold, VjpMatchesFd) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    Vector x = rng.normal_vector(6);
    const double lam = 0.3;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (std::abs(std::abs(x(i)) - lam) < 1e-3) x(i) += 0.01;
    const Matrix fd = oracle::fd_jacobian([&](const Vector& y) { return soft_threshold(y, lam); }, x);
    const Matrix an = jac_from_vjp([&](const Vector& v) { return soft_threshold_vjp(x, lam, v); }, 6);
    EXPECT_LE((fd - an).cwiseAbs().maxCoeff(), 1e-6);
  }
}
TEST(SoftThreshold, NegativeLambdaRejected) { EXPECT_THROW(soft_threshold(vec({1}), -1.0), Error); }

TEST(ProjectBox, Clamp) {
  const BoxSpec box = BoxSpec::uniform(3, 0, 1);
  EXPECT_EQ(project_box(vec({-1, 0.5, 2}), box), vec({0, 0.5, 1}));
  EXPECT_EQ(project_box(vec({0.1, 0.5, 0.9}), box), vec({0.1, 0.5, 0.9}));
  EXPECT_EQ(project_box_vjp(vec({-1, 0.5, 2}), box, vec({1, 1, 1})), vec({0, 1, 0}));
}
TEST(ProjectBox, AtBoundIsClamped) {
  EXPECT_EQ(project_box_vjp(vec({0.0, 1.0}), BoxSpec::uniform(2, 0, 1), vec({1, 1})), vec({0, 0}));
}
TEST(ProjectBox, InvalidBoxRejected) {
  BoxSpec box{vec({1}), vec({0})};
  EXPECT_THROW(project_box(vec({0.5}), box), Error);
}

TEST(ProjectNonneg, Basics) {
  EXPECT_EQ(project_nonneg(vec({-1, 2})), vec({0, 2}));
  EXPECT_EQ(project_nonneg(vec({0, 3})), vec({0, 3}));
  EXPECT_EQ(project_nonneg_vjp(vec({-1, 2, 0}), vec({5, 6, 7})), vec({0, 6, 0}));
}

TEST(CappedSimplex, ClampedExample) {
  expect_vec_near(project_capped_simplex(vec({2, 0.1, -1}), {1.0, 3}), vec({1, 0, 0}), 1e-12);
}
TEST(CappedSimplex, InteriorShift) {
  expect_vec_near(project_capped_simplex(vec({0.6, 0.3}), {1.0, 2}), vec({0.65, 0.35}), 1e-12);
}
TEST(CappedSimplex, Symmetric) {
  expect_vec_near(project_capped_simplex(vec({3.3, 3.3}), {1.0, 2}), vec({0.5, 0.5}), 1e-12);
}
TEST(CappedSimplex, MatchesEnumerationOracle) {
  // Projection as a QP over (y, s) with y + s = 1, Σy = k, y, s ≥ 0.
  Rng rng(7);
  for (int t = 0; t < 40; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(4));
    const double k = 1.0 + static_cast<double>(rng.below(static_cast<uint64_t>(n - 1)));
    const Vector x = rng.uniform_vector(n, -1.0, 2.0);
    Matrix Q = Matrix::Zero(2 * n, 2 * n);
    Q.topLeftCorner(n, n) = Matrix::Identity(n, n);
    Q.bottomRightCorner(n, n) = 1e-9 * Matrix::Identity(n, n);
    Vector p = Vector::Zero(2 * n);
    p.head(n) = -x;
    Matrix A = Matrix::Zero(n + 1, 2 * n);
    A.topLeftCorner(n, n) = Matrix::Identity(n, n);
    A.topRightCorner(n, n) = Matrix::Identity(n, n);
    A.row(n).head(n).setOnes();
    Vector b = Vector::Ones(n + 1);
    b(n) = k;
    const auto ref = oracle::enumerate_standard_qp(Q, p, A, b);
    ASSERT_TRUE(ref.has_value());
    expect_vec_near(project_capped_simplex(x, {k, n}), ref->x.head(n), 1e-6);
  }
}
TEST(CappedSimplex, VjpInteriorAnnihilatesConstants) {
  expect_vec_near(project_capped_simplex_vjp(vec({0.6, 0.3}), {1.0, 2}, vec({1, 1})), vec({0, 0}), 1e-15);
}
TEST(CappedSimplex, VjpAllClampedIsDegenerate) {
  try {
    project_capped_simplex_vjp(vec({2, 0.1, -1}), {1.0, 3}, vec({1, 0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateFreeSet);
  }
  // The step-level projector treats that case as fully clamped.
  const CappedSimplexProjector proj({{1.0, 3}});
  EXPECT_EQ(proj.linearize(vec({2, 0.1, -1}))(vec({1, 0, 0})), Vector::Zero(3));
}
TEST(CappedSimplex, VjpNearbyNondegenerateMatchesFd) {
  // Pulling x₀ down frees the first two coordinates: y = [0.975, 0.025, 0].
  const Vector x = vec({1.05, 0.1, -1});
  const CappedSimplexSpec spec{1.0, 3};
  const Matrix fd = oracle::fd_jacobian([&](const Vector& y) { return project_capped_simplex(y, spec); }, x);
  const Matrix an = jac_from_vjp([&](const Vector& v) { return project_capped_simplex_vjp(x, spec, v); }, 3);
  expect_vec_near(project_capped_simplex(x, spec), vec({0.975, 0.025, 0}), 1e-12);
  EXPECT_LE((fd - an).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_NEAR(an(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(an(0, 1), -0.5, 1e-15);
}
TEST(CappedSimplex, VjpMatchesFdRandom) {
  Rng rng(9);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.below(5));
    const CappedSimplexSpec spec{2.0, n};
    const Vector x = rng.uniform_vector(n, -0.5, 1.5);
    const Vector y = project_capped_simplex(x, spec);
    if (((y.array() > 1e-4) && (y.array() < 1 - 1e-4)).count() == 0) continue;
    if (((y.array() > 0) && (y.array() < 1e-4)).count() || ((y.array() < 1) && (y.array() > 1 - 1e-4)).count()) continue;
    const Matrix fd = oracle::fd_jacobian([&](const Vector& z) { return project_capped_simplex(z, spec); }, x);
    const Matrix an = jac_from_vjp([&](const Vector& v) { return project_capped_simplex_vjp(x, spec, v); }, n);
    EXPECT_LE((fd - an).cwiseAbs().maxCoeff(), 1e-5);
  }
}
TEST(CappedSimplex, InvalidK) {
  EXPECT_THROW(project_capped_simplex(vec({0.1, 0.2}), {3.0, 2}), Error);
  EXPECT_THROW(project_capped_simplex(vec({0.1, 0.2}), {1.0, 3}), Error);
}

TEST(ProjectionProperties, FeasibleIdempotentNonexpansive) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(8));
    const Vector x = 3.0 * rng.normal_vector(n), y = 3.0 * rng.normal_vector(n);
    const BoxSpec box = BoxSpec::uniform(n, -0.5, 0.7);
    const CappedSimplexSpec cs{1.0 + static_cast<double>(rng.below(static_cast<uint64_t>(n - 1))), n};
    const Vector pb = project_box(x, box);
    EXPECT_GE(pb.minCoeff(), -0.5);
    EXPECT_LE(pb.maxCoeff(), 0.7);
    EXPECT_EQ(project_box(pb, box), pb);
    EXPECT_LE((pb - project_box(y, box)).norm(), (x - y).norm() + 1e-15);
    const Vector pn = project_nonneg(x);
    EXPECT_GE(pn.minCoeff(), 0.0);
    EXPECT_EQ(project_nonneg(pn), pn);
    EXPECT_LE((pn - project_nonneg(y)).norm(), (x - y).norm() + 1e-15);
    const Vector pc = project_capped_simplex(x, cs);
    EXPECT_NEAR(pc.sum(), cs.k, 1e-9);
    EXPECT_GE(pc.minCoeff(), 0.0);
    EXPECT_LE(pc.maxCoeff(), 1.0);
    EXPECT_EQ(project_capped_simplex(pc, cs), pc);
    EXPECT_LE((pc - project_capped_simplex(y, cs)).norm(), (x - y).norm() + 1e-9);
  }
}
