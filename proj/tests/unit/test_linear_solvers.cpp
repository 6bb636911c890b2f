#include "foldcore/linear_solvers.hpp"
#include "foldcore/linalg.hpp"
#include "foldcore/rng.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace foldcore;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

// Random B with prescribed spectral radius via a similarity transform of a
// diagonal.
Matrix random_contraction(Rng& rng, Eigen::Index n, double rho) {
  Vector d = rng.uniform_vector(n, -rho, rho);
  d(0) = rho;
  Matrix S = rng.normal_matrix(n, n) + 2.0 * Matrix::Identity(n, n);
  Matrix D = d.asDiagonal();
  Eigen::MatrixXd Sd = S;
  return Matrix(S * D * Matrix(Sd.inverse()));
}

}  // namespace

TEST(Lfpi, ScalarGeometricSeries) {
  Matrix B(1, 1);
  B(0, 0) = 0.5;
  const auto r = lfpi(as_operator(B), Vector::Ones(1), Vector::Zero(1), 1e-12, 1000);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.solution(0), 2.0, 1e-11);
}

TEST(Lfpi, ZeroOperator) {
  Vector b(3);
  b << 1, -2, 3;
  const auto r = lfpi(as_operator(Matrix::Zero(3, 3)), b, Vector::Zero(3), 1e-12, 10);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.solution, b);
  EXPECT_LE(r.iterations, 2);
}

TEST(Lfpi, DiagonalRate) {
  const Matrix B = diag2(0.9, 0.5);
  const auto r = lfpi(as_operator(B), Vector::Ones(2), Vector::Zero(2), 1e-12, 5000);
  ASSERT_TRUE(r.converged);
  const Vector ref = oracle::gauss_solve(Matrix::Identity(2, 2) - B, Vector::Ones(2));
  EXPECT_NEAR(r.solution(0), ref(0), 1e-10);
  EXPECT_NEAR(r.solution(1), ref(1), 1e-10);
  EXPECT_NEAR(ref(0), 10.0, 1e-12);
  EXPECT_NEAR(ref(1), 2.0, 1e-12);
  const size_t n = r.per_iter_residuals.size() / 2;
  EXPECT_NEAR(r.per_iter_residuals[n] / r.per_iter_residuals[n - 1], 0.9, 1e-6);
  EXPECT_NEAR(empirical_rate(r.per_iter_residuals), -std::log(0.9), 0.05 * -std::log(0.9));
}

TEST(Lfpi, ReportInvariants) {
  Rng rng(2);
  const Matrix B = random_contraction(rng, 6, 0.7);
  const Vector b = rng.normal_vector(6);
  const auto r = lfpi(as_operator(B), b, Vector::Zero(6), 1e-11, 10000);
  EXPECT_EQ(static_cast<int>(r.per_iter_residuals.size()), r.iterations);
  const double res = (r.solution - B * r.solution - b).lpNorm<Eigen::Infinity>();
  EXPECT_NEAR(r.residual_norm, res, 1e-12);
}

TEST(Lfpi, DivergesOnExpansiveOperator) {
  Matrix B(1, 1);
  B(0, 0) = 2.0;
  try {
    lfpi(as_operator(B), Vector::Ones(1), Vector::Zero(1), 1e-12, 10000);
    FAIL();
  } catch (const LinSolveError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Divergence);
  }
}

TEST(Lfpi, MaxIterLeavesUnconverged) {
  Matrix B(1, 1);
  B(0, 0) = 0.99;
  const auto r = lfpi(as_operator(B), Vector::Ones(1), Vector::Zero(1), 1e-14, 5);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 5);
}

TEST(Lfpi, RateMatchesSpectralRadius) {
  Rng rng(31);
  for (double rho : {0.5, 0.7, 0.9}) {
    const Matrix B = random_contraction(rng, 5, rho);
    const auto r = lfpi(as_operator(B), rng.normal_vector(5), Vector::Zero(5), 1e-13, 100000);
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(empirical_rate(r.per_iter_residuals), -std::log(rho), 0.1 * -std::log(rho)) << rho;
  }
}

TEST(Krylov, Identity) {
  Vector b(3);
  b << 1, 2, 3;
  const auto r = krylov_solve(as_operator(Matrix::Identity(3, 3)), b, Vector::Zero(3), 1e-12, 100);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LE((r.solution - b).norm(), 1e-14);
}

TEST(Krylov, Diagonal) {
  Vector b(2);
  b << 2, 8;
  const auto r = krylov_solve(as_operator(diag2(2, 4)), b, Vector::Zero(2), 1e-12, 100);
  EXPECT_NEAR(r.solution(0), 1.0, 1e-12);
  EXPECT_NEAR(r.solution(1), 2.0, 1e-12);
}

TEST(Krylov, TwoDimensionalExact) {
  const Matrix A = Matrix::Identity(2, 2) - diag2(0.9, 0.5);
  const auto r = krylov_solve(as_operator(A), Vector::Ones(2), Vector::Zero(2), 1e-12, 100);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2);
  EXPECT_NEAR(r.solution(0), 10.0, 1e-10);
  EXPECT_NEAR(r.solution(1), 2.0, 1e-10);
}

TEST(Krylov, AgreesWithLfpiAndIsFaster) {
  Rng rng(41);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(19));
    const double rho = rng.uniform(0.5, 0.9);
    const Matrix B = random_contraction(rng, n, rho);
    const Vector b = rng.normal_vector(n);
    const auto l = lfpi(as_operator(B), b, Vector::Zero(n), 1e-12, 200000);
    const auto k = krylov_solve(as_operator(Matrix(Matrix::Identity(n, n) - B)), b, Vector::Zero(n), 1e-11, 10000);
    ASSERT_TRUE(l.converged && k.converged);
    EXPECT_LE(oracle::rel_diff(l.solution, k.solution), 1e-6);
    EXPECT_LE(k.iterations, l.iterations);
  }
}

TEST(Krylov, RestartedLargeSystem) {
  Rng rng(43);
  const Eigen::Index n = 80;
  const Matrix B = random_contraction(rng, n, 0.95);
  const Vector b = rng.normal_vector(n);
  const Matrix A = Matrix::Identity(n, n) - B;
  const auto k = krylov_solve(as_operator(A), b, Vector::Zero(n), 1e-12, 20000);
  ASSERT_TRUE(k.converged);
  EXPECT_LE((A * k.solution - b).norm(), 1e-12 * (1 + b.norm()) * 10);
  EXPECT_NEAR(k.residual_norm, (A * k.solution - b).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Krylov, NoConvergenceCarriesReport) {
  Rng rng(44);
  const Matrix A = rng.normal_matrix(40, 40);
  try {
    krylov_solve(as_operator(A), rng.normal_vector(40), Vector::Zero(40), 1e-14, 5);
    FAIL();
  } catch (const LinSolveError& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
    EXPECT_EQ(e.report().solution.size(), 40);
  }
}

TEST(Krylov, ZeroRightHandSide) {
  const auto r = krylov_solve(as_operator(diag2(2, 3)), Vector::Zero(2), Vector::Zero(2), 1e-12, 10);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.solution, Vector::Zero(2));
}

TEST(EmpiricalRate, GeometricSequence) {
  EXPECT_NEAR(empirical_rate({1, 0.5, 0.25, 0.125, 0.0625}), std::log(2.0), 1e-12);
}

TEST(EmpiricalRate, Constant) { EXPECT_NEAR(empirical_rate({3, 3, 3, 3, 3, 3}), 0.0, 1e-15); }

TEST(EmpiricalRate, TooShort) {
  try {
    empirical_rate({1, 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}
