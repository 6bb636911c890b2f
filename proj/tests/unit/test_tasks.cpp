#include "foldcore/learning/data.hpp"
#include "foldcore/rng.hpp"
#include "foldcore/tasks/bilinear.hpp"
#include "foldcore/tasks/denoise.hpp"
#include "foldcore/tasks/portfolio.hpp"
#include "foldcore/tasks/qp_layer.hpp"
#include "foldcore/tasks/topk.hpp"
#include "foldcore/tasks/training.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace foldcore;

namespace {

double fd_excess(const DecisionMap& map, const Vector& c, const Vector& g, double abs_tol = 1e-4,
                 double rel_tol = 1e-3) {
  const Vector x = map.decide(c);
  const Vector an = map.decide_vjp(c, x, g);
  const Vector fd = oracle::fd_gradient([&](const Vector& cc) { return g.dot(map.decide(cc)); }, c);
  return oracle::mixed_excess(an, fd, abs_tol, rel_tol);
}

}  // namespace

TEST(Topk, MatchesBisectionOracle) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(6));
    const double k = 1.0 + static_cast<double>(rng.below(static_cast<uint64_t>(n - 1)));
    const Vector c = 2.0 * rng.normal_vector(n);
    const Vector x = topk_forward(c, k);
    EXPECT_LE((x - oracle::topk(c, k)).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_NEAR(x.sum(), k, 1e-12);
    EXPECT_GE(x.minCoeff(), 0.0);
    EXPECT_LE(x.maxCoeff(), 1.0);
  }
}

TEST(Topk, SymmetricScores) {
  const Vector x = topk_forward(Vector::Zero(2), 1.0);
  EXPECT_NEAR(x(0), 0.5, 1e-15);
  EXPECT_NEAR(x(1), 0.5, 1e-15);
}

TEST(Topk, RejectsBadK) {
  EXPECT_THROW(topk_forward(Vector::Zero(3), 3.0), Error);
  EXPECT_THROW(topk_forward(Vector::Zero(3), 0.0), Error);
}

TEST(Topk, ClosedFormIsFixedPointOfPgd) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Vector c = 2.0 * rng.normal_vector(5);
    const Vector x = topk_forward(c, 2.0);
    const auto step = make_topk_step(5, 2.0, topk_step_size(x));
    EXPECT_LE(fixed_point_residual(*step, x, c), 1e-13);
  }
}

TEST(Topk, DecisionGradientMatchesFd) {
  Rng rng(3);
  const TopkDecision map(5, 2.0);
  for (int t = 0; t < 10; ++t) {
    const Vector c = rng.normal_vector(5);
    EXPECT_LE(fd_excess(map, c, rng.normal_vector(5)), 0.0);
  }
}

TEST(QpLayer, AdmmMatchesEnumeration) {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(5));
    const QpStandard qp = random_standard_qp(rng, n, 1 + static_cast<Eigen::Index>(rng.below(n > 2 ? 2 : 1)));
    const AdmmQpLayer layer(qp);
    const SolveReport r = layer.layer().forward(qp.p);
    const auto ref = oracle::enumerate_standard_qp(qp.Q, qp.p, qp.A, qp.b);
    ASSERT_TRUE(ref.has_value());
    const Vector x = layer.primal(r.x_star);
    EXPECT_LE((x - ref->x).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_GE(x.minCoeff(), 0.0);
    EXPECT_LE((qp.A * x - qp.b).lpNorm<Eigen::Infinity>(), 1e-8);
    EXPECT_LE(r.fixed_point_residual, 1e-11);
  }
}

TEST(QpLayer, RandomQpIsFeasibleAndConvex) {
  Rng rng(5);
  const QpStandard qp = random_standard_qp(rng, 6, 2);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(qp.Q)};
  EXPECT_GE(es.eigenvalues().minCoeff(), 0.5 - 1e-12);
  EXPECT_TRUE(oracle::enumerate_standard_qp(qp.Q, qp.p, qp.A, qp.b).has_value());
  EXPECT_THROW(random_standard_qp(rng, 3, 3), Error);
}

TEST(QpLayer, GradientMatchesFd) {
  Rng rng(6);
  for (int t = 0; t < 5; ++t) {
    const QpStandard qp = random_standard_qp(rng, 4, 1);
    const AdmmQpLayer layer(qp);
    const Vector g = rng.normal_vector(4);
    const Vector c = qp.p;
    const Vector x = layer.layer().forward(c).x_star;
    const Vector an = layer.layer().backward_vjp(c, x, layer.state_cotangent(g)).grad_c;
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& cc) { return g.dot(layer.primal(layer.layer().forward(cc).x_star)); }, c);
    EXPECT_LE(oracle::mixed_excess(an, fd, 1e-5, 1e-4), 0.0);
  }
}

TEST(Denoise, ZeroLambdaIsIdentity) {
  const DenoiseLayer layer(0.0);
  Rng rng(7);
  const Matrix D = difference_operator(8);
  const Vector d = rng.normal_vector(8);
  const auto out = layer.forward(D, d);
  EXPECT_LE((out.u - d).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LE(layer.vjp(D, d, out, rng.normal_vector(8)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Denoise, ConstantSignalIsUntouched) {
  const DenoiseLayer layer(0.5);
  const Vector d = Vector::Constant(10, 2.5);
  EXPECT_LE((layer.forward(difference_operator(10), d).u - d).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(Denoise, GradientMatchesFd) {
  Rng rng(8);
  const DenoiseLayer layer(0.5);
  for (int t = 0; t < 3; ++t) {
    const Eigen::Index n = 12;
    const Matrix D = difference_operator(n) + 0.05 * rng.normal_matrix(n - 1, n);
    const Vector d = 3.0 * rng.normal_vector(n);
    const Vector ub = rng.normal_vector(n);
    const auto out = layer.forward(D, d);
    const Vector an = flatten_row_major(layer.vjp(D, d, out, ub));
    const Vector fd = oracle::fd_gradient(
        [&](const Vector& c) {
          const Matrix Dc = Eigen::Map<const Matrix>(c.data(), D.rows(), D.cols());
          return ub.dot(layer.forward(Dc, d).u);
        },
        flatten_row_major(D));
    EXPECT_LE(oracle::mixed_excess(an, fd, 1e-4, 1e-3), 0.0);
  }
}

TEST(Portfolio, KktAndOptimality) {
  const auto data = generate_portfolio_data(3, 2);
  const Matrix& V = data.V;
  const Eigen::Index n = V.rows();
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const Vector c = data.split.train.targets.row(t).transpose();
    const PortfolioSolution s = solve_portfolio(V, data.gamma, c);
    const Vector& x = s.x;
    EXPECT_NEAR(x.sum(), 1.0, 1e-10);
    EXPECT_GE(x.minCoeff(), -1e-12);
    EXPECT_NEAR(x.dot(V * x), data.gamma, 1e-12 * data.gamma + 1e-15);
    EXPECT_GT(s.risk_multiplier, 0.0);
    const Vector stat = -c + 2.0 * s.risk_multiplier * V * x + s.budget_multiplier * Vector::Ones(n) - s.bound_multipliers;
    EXPECT_LE(stat.lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_GE(s.bound_multipliers.minCoeff(), -1e-12);
    EXPECT_LE(s.bound_multipliers.cwiseProduct(x).cwiseAbs().maxCoeff(), 1e-12);
    // No feasible random portfolio earns more.
    for (int k = 0; k < 500; ++k) {
      Vector y = rng.uniform_vector(n, 0.0, 1.0);
      y = y.array().pow(4.0).matrix();
      y /= y.sum();
      if (y.dot(V * y) <= data.gamma) EXPECT_LE(c.dot(y), c.dot(x) + 1e-12);
    }
  }
}

TEST(Portfolio, StateIsSqpFixedPoint) {
  const auto data = generate_portfolio_data(3, 1);
  const PortfolioDecision map(data.V, data.gamma);
  for (int t = 0; t < 5; ++t) {
    const Vector c = data.split.test.targets.row(t).transpose();
    EXPECT_LE(fixed_point_residual(map.step(), map.state(c), c), 1e-11);
  }
}

TEST(Portfolio, SlackBudgetPicksBestAsset) {
  const Matrix V = Matrix::Identity(3, 3);
  const Vector c = (Vector(3) << 0.1, 0.3, 0.2).finished();
  const PortfolioSolution s = solve_portfolio(V, 2.0, c);
  EXPECT_FALSE(s.risk_binding);
  EXPECT_EQ(s.x, Vector::Unit(3, 1));
  const PortfolioDecision map(V, 2.0);
  EXPECT_EQ(map.decide_vjp(c, s.x, Vector::Ones(3)), Vector::Zero(3));
  EXPECT_THROW(map.state(c), Error);
}

TEST(Portfolio, TiedTopPrices) {
  const Matrix V = Matrix::Identity(3, 3);
  const Vector c = (Vector(3) << 0.3, 0.3, 0.1).finished();
  // No single asset fits γ = 0.6 but the even mix of the tied pair does.
  const PortfolioSolution slack = solve_portfolio(V, 0.6, c);
  EXPECT_FALSE(slack.risk_binding);
  EXPECT_LE((slack.x - (Vector(3) << 0.5, 0.5, 0.0).finished()).lpNorm<Eigen::Infinity>(), 1e-12);
  const PortfolioDecision map(V, 0.6);
  EXPECT_EQ(map.decide_vjp(c, slack.x, Vector::Ones(3)), Vector::Zero(3));

  const PortfolioSolution bind = solve_portfolio(V, 0.4, c);
  EXPECT_TRUE(bind.risk_binding);
  EXPECT_NEAR(bind.x.sum(), 1.0, 1e-12);
  EXPECT_GE(bind.x.minCoeff(), -1e-12);
  EXPECT_NEAR(bind.x.squaredNorm(), 0.4, 1e-12);
  EXPECT_NEAR(bind.x(0), bind.x(1), 1e-9);
}

TEST(Portfolio, GradientMatchesFd) {
  const auto data = generate_portfolio_data(4, 1);
  const PortfolioDecision map(data.V, data.gamma);
  Rng rng(10);
  for (int t = 0; t < 5; ++t) {
    const Vector c = data.split.train.targets.row(t).transpose();
    EXPECT_LE(fd_excess(map, c, rng.normal_vector(c.size())), 0.0);
  }
}

TEST(Bilinear, ObjectiveDerivatives) {
  Rng rng(11);
  const BilinearObjective f(rng.normal_matrix(3, 3), 1.0);
  const Vector z = rng.uniform_vector(6, 0.0, 1.0), c = rng.normal_vector(6), w = rng.normal_vector(6);
  const Vector fd = oracle::fd_gradient([&](const Vector& zz) { return f.value(zz, c); }, z);
  EXPECT_LE(oracle::mixed_excess(f.gradient(z, c), fd, 1e-8, 1e-6), 0.0);
  const Vector fdh = oracle::fd_gradient([&](const Vector& zz) { return w.dot(f.gradient(zz, c)); }, z);
  EXPECT_LE(oracle::mixed_excess(f.hessian_vjp(z, c, w), fdh, 1e-8, 1e-6), 0.0);
  EXPECT_EQ(f.mixed_vjp(z, c, w), -w);
}

TEST(Bilinear, ConvexCaseMatchesEnumeration) {
  // With σmax(Q) < μ the program is a strictly convex QP over the product
  // of capped simplices; enumeration of active bounds gives the answer.
  Rng rng(12);
  const Eigen::Index n = 3;
  for (int t = 0; t < 10; ++t) {
    Matrix Q = rng.normal_matrix(n, n);
    Q *= 0.5 / Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(Q)).singularValues()(0);
    BilinearConfig cfg;
    cfg.mu = 1.0;
    const BilinearLayer layer(Q, cfg);
    const Vector c = 2.0 * rng.normal_vector(2 * n);
    const Vector z = layer.decide(c);
    Matrix H = Matrix::Identity(2 * n, 2 * n);
    H.topRightCorner(n, n) = -Q;
    H.bottomLeftCorner(n, n) = -Q.transpose();
    Matrix A = Matrix::Zero(2, 2 * n);
    A.block(0, 0, 1, n).setOnes();
    A.block(1, n, 1, n).setOnes();
    const Vector b = (Vector(2) << 1.0, 2.0).finished();
    Matrix G(4 * n, 2 * n);
    G << Matrix::Identity(2 * n, 2 * n), -Matrix::Identity(2 * n, 2 * n);
    Vector h(4 * n);
    h << Vector::Ones(2 * n), Vector::Zero(2 * n);
    const auto ref = oracle::enumerate_general_qp(H, -c, A, b, G, h);
    ASSERT_TRUE(ref.has_value());
    EXPECT_LE((z - ref->x).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(Bilinear, ForwardIsFeasibleBestOfStarts) {
  const auto data = generate_bilinear_data(1);
  const BilinearLayer layer(data.Q);
  const DecisionObjective f = layer.objective();
  for (int t = 0; t < 5; ++t) {
    const Vector c = data.split.train.targets.row(t).transpose();
    const Vector z = layer.decide(c);
    EXPECT_NEAR(z.head(5).sum(), 1.0, 1e-12);
    EXPECT_NEAR(z.tail(5).sum(), 2.0, 1e-12);
    EXPECT_GE(z.minCoeff(), 0.0);
    EXPECT_LE(z.maxCoeff(), 1.0);
    EXPECT_LE(fixed_point_residual(layer.step(), z, c), 1e-12);
    for (const Vector& z0 : layer.starting_points())
      EXPECT_LE(f.value(z, c), f.value(layer.local_solve(c, z0), c) + 1e-12);
  }
}

TEST(Bilinear, GradientMatchesFd) {
  const auto data = generate_bilinear_data(2);
  const BilinearLayer layer(data.Q);
  Rng rng(13);
  for (int t = 0; t < 5; ++t) {
    const Vector c = data.split.train.targets.row(t).transpose();
    EXPECT_LE(fd_excess(layer, c, rng.normal_vector(10)), 0.0);
  }
}

TEST(Training, RegretRunIsDeterministic) {
  const auto data = generate_portfolio_data(5, 1, 40);
  const PortfolioDecision map(data.V, data.gamma);
  RegretTraining task;
  task.objective = portfolio_objective();
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.seed = 3;
  auto run = [&] {
    Mlp m = Mlp::init({5, 8, 6}, Activation::Relu, Activation::Identity, 1);
    return train_predictor(m, data.split, map, task, PredictLoss::Regret, cfg);
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.size(), 3u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].train_loss, b[i].train_loss);
    EXPECT_EQ(a[i].test_regret, b[i].test_regret);
    EXPECT_GE(a[i].test_regret, -1e-8);
  }
}
