#include "foldcore/learning/data.hpp"
#include "foldcore/learning/losses.hpp"
#include "foldcore/learning/mlp.hpp"
#include "foldcore/learning/optim.hpp"
#include "foldcore/rng.hpp"
#include "foldcore/tasks/denoise.hpp"
#include "foldcore/tasks/topk.hpp"
#include "foldcore/tasks/training.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

using namespace foldcore;

namespace {

// Closed-form decision for a linear objective over the unit box.
class BoxArgmin : public DecisionMap {
 public:
  explicit BoxArgmin(Eigen::Index n) : n_(n) {}
  Eigen::Index param_dim() const override { return n_; }
  Eigen::Index decision_dim() const override { return n_; }
  Vector decide(const Vector& c) const override { return (c.array() < 0.0).cast<double>().matrix(); }
  Vector decide_vjp(const Vector&, const Vector&, const Vector&) const override { return Vector::Zero(n_); }

 private:
  Eigen::Index n_;
};

class Identity : public DecisionMap {
 public:
  explicit Identity(Eigen::Index n) : n_(n) {}
  Eigen::Index param_dim() const override { return n_; }
  Eigen::Index decision_dim() const override { return n_; }
  Vector decide(const Vector& c) const override { return c; }
  Vector decide_vjp(const Vector&, const Vector&, const Vector& g) const override { return g; }

 private:
  Eigen::Index n_;
};

DecisionObjective linear_objective() {
  DecisionObjective f;
  f.value = [](const Vector& x, const Vector& c) { return c.dot(x); };
  f.grad_x = [](const Vector&, const Vector& c) -> Vector { return c; };
  return f;
}

// Coefficient of determination of the least-squares affine fit, pooled over
// all target columns.
double linear_fit_r2(const Matrix& X, const Matrix& Y) {
  Eigen::MatrixXd A(X.rows(), X.cols() + 1);
  A << Eigen::MatrixXd(X), Eigen::VectorXd::Ones(X.rows());
  const Eigen::MatrixXd Yd = Y;
  const Eigen::MatrixXd coef = A.colPivHouseholderQr().solve(Yd);
  const double ss_res = (Yd - A * coef).squaredNorm();
  const double ss_tot = (Yd.rowwise() - Yd.colwise().mean()).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

TEST(Mlp, IdentityLayerPassesInputThrough) {
  DenseLayer l{Matrix::Identity(3, 3), Vector::Zero(3), Activation::Identity};
  const Mlp m({l});
  const Vector x = (Vector(3) << 1.5, -2.0, 0.25).finished();
  EXPECT_EQ(m.forward(x), x);
}

TEST(Mlp, ReluExample) {
  DenseLayer l{(Matrix(1, 2) << 1.0, -1.0).finished(), Vector::Zero(1), Activation::Relu};
  const Mlp m({l});
  EXPECT_DOUBLE_EQ(m.forward((Vector(2) << 2.0, 3.0).finished())(0), 0.0);
  EXPECT_DOUBLE_EQ(m.forward((Vector(2) << 3.0, 2.0).finished())(0), 1.0);
}

TEST(Mlp, RejectsMismatchedLayers) {
  DenseLayer a{Matrix::Zero(4, 3), Vector::Zero(4), Activation::Relu};
  DenseLayer b{Matrix::Zero(2, 5), Vector::Zero(2), Activation::Identity};
  EXPECT_THROW(Mlp({a, b}), Error);
}

TEST(Mlp, ParamsRoundTrip) {
  Mlp m = Mlp::init({4, 6, 3}, Activation::Tanh, Activation::Identity, 3);
  EXPECT_EQ(m.param_count(), 4 * 6 + 6 + 6 * 3 + 3);
  Vector p = m.params();
  p(0) += 1.0;
  m.set_params(p);
  EXPECT_EQ(m.params(), p);
}

TEST(Mlp, GradientsMatchFiniteDifferences) {
  Mlp m = Mlp::init({4, 7, 5, 3}, Activation::Tanh, Activation::Identity, 11);
  Rng rng(5);
  // Nonzero biases so that the bias gradients are exercised too.
  Vector p = m.params() + 0.1 * rng.normal_vector(m.param_count());
  m.set_params(p);
  const Vector x = rng.normal_vector(4), g = rng.normal_vector(3);
  Mlp::Tape tape;
  m.forward(x, tape);
  Vector grad = Vector::Zero(m.param_count());
  const Vector gx = m.backward(tape, g, grad);
  const Vector fd_p = oracle::fd_gradient(
      [&](const Vector& q) {
        Mlp mm = m;
        mm.set_params(q);
        return g.dot(mm.forward(x));
      },
      p);
  const Vector fd_x = oracle::fd_gradient([&](const Vector& xx) { return g.dot(m.forward(xx)); }, x);
  EXPECT_LE(oracle::mixed_excess(grad, fd_p, 1e-7, 1e-5), 0.0);
  EXPECT_LE(oracle::mixed_excess(gx, fd_x, 1e-7, 1e-5), 0.0);
}

TEST(Mlp, InitIsDeterministic) {
  const Mlp a = Mlp::init({3, 5, 2}, Activation::Relu, Activation::Identity, 9);
  const Mlp b = Mlp::init({3, 5, 2}, Activation::Relu, Activation::Identity, 9);
  EXPECT_EQ(a.params(), b.params());
}

TEST(Losses, MseExample) {
  const LossValue l = mse((Vector(2) << 1.0, 2.0).finished(), Vector::Zero(2));
  EXPECT_DOUBLE_EQ(l.value, 2.5);
  EXPECT_DOUBLE_EQ(l.grad(0), 1.0);
  EXPECT_DOUBLE_EQ(l.grad(1), 2.0);
}

TEST(Losses, BceExampleAndGradient) {
  const LossValue l = binary_cross_entropy(Vector::Constant(1, 0.5), Vector::Ones(1));
  EXPECT_NEAR(l.value, std::log(2.0), 1e-15);
  const Vector p = (Vector(3) << 0.2, 0.7, 0.9).finished(), y = (Vector(3) << 0.0, 1.0, 1.0).finished();
  const Vector fd =
      oracle::fd_gradient([&](const Vector& q) { return binary_cross_entropy(q, y).value; }, p, 1e-7);
  EXPECT_LE(oracle::mixed_excess(binary_cross_entropy(p, y).grad, fd, 1e-7, 1e-5), 0.0);
}

TEST(Losses, BceClipsSaturatedProbabilities) {
  const LossValue l = binary_cross_entropy(Vector::Zero(1), Vector::Ones(1));
  EXPECT_TRUE(std::isfinite(l.value));
  EXPECT_NEAR(l.value, -std::log(1e-7), 1e-9);
}

TEST(Regret, ZeroWhenPredictionIsExact) {
  const BoxArgmin map(3);
  const Vector c = (Vector(3) << -1.0, 2.0, -3.0).finished();
  EXPECT_EQ(regret(c, c, map, linear_objective(), false).regret, 0.0);
}

TEST(Regret, FlippedSignCostsThatCoordinate) {
  const BoxArgmin map(3);
  const Vector c_bar = (Vector(3) << -1.0, 2.0, -3.0).finished();
  const Vector c_hat = (Vector(3) << 1.0, 2.0, -3.0).finished();
  EXPECT_DOUBLE_EQ(regret(c_hat, c_bar, map, linear_objective(), false).regret, 1.0);
}

TEST(Regret, GradientMatchesFiniteDifferences) {
  const TopkDecision map(5, 2.0);
  DecisionObjective f;
  f.value = [](const Vector& x, const Vector& c) { return -c.dot(x); };
  f.grad_x = [](const Vector&, const Vector& c) -> Vector { return -c; };
  Rng rng(21);
  for (int t = 0; t < 5; ++t) {
    const Vector c_bar = rng.normal_vector(5), c_hat = rng.normal_vector(5);
    const RegretValue r = regret(c_hat, c_bar, map, f);
    const Vector fd = oracle::fd_gradient([&](const Vector& c) { return regret(c, c_bar, map, f, false).regret; }, c_hat);
    EXPECT_LE(oracle::mixed_excess(r.grad, fd, 1e-6, 1e-3), 0.0);
    EXPECT_GE(r.regret, -1e-8);
  }
}

TEST(Optim, SgdStep) {
  Sgd opt(0.1);
  Vector p = Vector::Ones(2);
  opt.step(p, (Vector(2) << 1.0, -2.0).finished());
  EXPECT_NEAR(p(0), 0.9, 1e-15);
  EXPECT_NEAR(p(1), 1.2, 1e-15);
}

TEST(Optim, AdamFirstStepIsLrTimesSign) {
  Adam opt(2, 0.01);
  Vector p = Vector::Zero(2);
  opt.step(p, (Vector(2) << 3.0, -0.5).finished());
  EXPECT_NEAR(p(0), -0.01, 1e-9);
  EXPECT_NEAR(p(1), 0.01, 1e-9);
}

TEST(Optim, ConfigValidation) {
  TrainConfig c;
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Data, SplitIsNinetyTen) {
  const auto d = generate_denoise_data(1);
  EXPECT_EQ(d.split.train.size(), 180);
  EXPECT_EQ(d.split.test.size(), 20);
}

TEST(Data, SameSeedSameData) {
  const auto a = generate_bilinear_data(4), b = generate_bilinear_data(4), c = generate_bilinear_data(5);
  EXPECT_EQ(a.split.train.features, b.split.train.features);
  EXPECT_EQ(a.split.train.targets, b.split.train.targets);
  EXPECT_EQ(a.Q, b.Q);
  EXPECT_NE(a.split.train.targets, c.split.train.targets);
  const auto p = generate_portfolio_data(4, 2), q = generate_portfolio_data(4, 2);
  EXPECT_EQ(p.split.test.targets, q.split.test.targets);
  EXPECT_EQ(p.V, q.V);
}

TEST(Data, BilinearFeaturesInRange) {
  const auto d = generate_bilinear_data(2);
  for (const Dataset* s : {&d.split.train, &d.split.test}) {
    EXPECT_GE(s->features.minCoeff(), -2.0);
    EXPECT_LE(s->features.maxCoeff(), 2.0);
  }
  EXPECT_EQ(d.split.train.targets.cols(), 10);
}

TEST(Data, BilinearTargetsAreNonlinear) {
  const auto d = generate_bilinear_data(2);
  EXPECT_LT(linear_fit_r2(d.split.train.features, d.split.train.targets), 0.9);
}

TEST(Data, RescaleKeepsLogArgumentPositive) {
  EXPECT_GT(bilinear_rescale(-1.0), 0.0);
  EXPECT_LE(bilinear_rescale(1.0), 2.0);
  EXPECT_THROW(bilinear_nonlinearity(0.0), Error);
}

TEST(Data, PortfolioDegreeOneIsLinear) {
  const auto d = generate_portfolio_data(3, 1);
  EXPECT_GT(linear_fit_r2(d.split.train.features, d.split.train.targets), 1.0 - 1e-12);
  const auto d3 = generate_portfolio_data(3, 3);
  EXPECT_LT(linear_fit_r2(d3.split.train.features, d3.split.train.targets), 1.0 - 1e-6);
}

TEST(Data, PortfolioCovarianceAndBudget) {
  for (int deg = 1; deg <= 3; ++deg) {
    const auto d = generate_portfolio_data(7, deg);
    EXPECT_EQ(d.V, d.V.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(d.V)};
    EXPECT_GE(es.eigenvalues().minCoeff(), d.epsilon * (1.0 - 1e-12));
    const Eigen::Index n = d.V.rows();
    const double uniform = Vector::Ones(n).dot(d.V * Vector::Ones(n)) / static_cast<double>(n * n);
    EXPECT_LT(uniform, d.gamma);
  }
}

TEST(Data, DenoiseNoiseStatistics) {
  const auto d = generate_denoise_data(1);
  Matrix noise(200, 50);
  noise << d.split.train.features - d.split.train.targets, d.split.test.features - d.split.test.targets;
  const double mean = noise.mean();
  const double var = (noise.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.05);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Data, DifferenceOperatorKillsConstants) {
  const Matrix D = difference_operator(50);
  EXPECT_EQ(D.rows(), 49);
  EXPECT_EQ((D * Vector::Constant(50, 3.7)).lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(D(0, 0), 1.0);
  EXPECT_EQ(D(0, 1), -1.0);
}

TEST(Data, TvDenoisingBeatsRawNoise) {
  const auto d = generate_denoise_data(1);
  const DenoiseLayer layer(0.5);
  const Matrix D = difference_operator(50);
  const Dataset& s = d.split.train;
  double raw = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) raw += (s.features.row(i) - s.targets.row(i)).squaredNorm() / 50.0;
  raw /= static_cast<double>(s.size());
  EXPECT_LT(denoise_mse(D, layer, s), raw);
}

TEST(Data, TopkLabelsHaveKOnes) {
  const auto d = generate_topk_data(2);
  for (Eigen::Index i = 0; i < d.split.train.size(); ++i) EXPECT_EQ(d.split.train.targets.row(i).sum(), 2.0);
}

TEST(Data, CsvHasHeaderAndRows) {
  const auto d = generate_topk_data(2, 20);
  const std::string path = ::testing::TempDir() + "topk.csv";
  write_dataset_csv(d.split.train, path);
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  EXPECT_EQ(line, "f0,f1,f2,f3,f4,f5,f6,f7,t0,t1,t2,t3,t4");
  int rows = 0;
  while (std::getline(f, line)) ++rows;
  EXPECT_EQ(rows, 18);
}

TEST(Training, MseDecreasesOnRealizableToy) {
  // Linear targets, linear model, full-batch gradient descent: a convex
  // problem where a small step decreases the loss every epoch.
  Rng rng(13);
  Dataset all;
  all.features = rng.normal_matrix(40, 3);
  const Matrix W = rng.normal_matrix(2, 3);
  all.targets = all.features * W.transpose();
  const Split split = split_dataset(all);
  Mlp model = Mlp::init({3, 2}, Activation::Identity, Activation::Identity, 1);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.lr = 0.05;
  cfg.batch_size = 1000;
  cfg.epochs = 200;
  const Identity map(2);
  RegretTraining task;
  task.objective = linear_objective();
  const auto rows = train_predictor(model, split, map, task, PredictLoss::Mse, cfg);
  ASSERT_EQ(rows.size(), 201u);
  for (size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].train_mse, rows[i - 1].train_mse);
  EXPECT_LT(rows.back().train_mse, 1e-3 * rows.front().train_mse);
}

TEST(Training, PerfectPredictionGivesZeroRegret) {
  // A model that already reproduces the targets has nothing to regret.
  Rng rng(17);
  Dataset all;
  all.features = rng.normal_matrix(30, 5);
  all.targets = all.features;
  const Split split = split_dataset(all);
  Mlp model({DenseLayer{Matrix::Identity(5, 5), Vector::Zero(5), Activation::Identity}});
  const TopkDecision map(5, 2.0);
  RegretTraining task;
  task.objective.value = [](const Vector& x, const Vector& c) { return -c.dot(x); };
  task.objective.grad_x = [](const Vector&, const Vector& c) -> Vector { return -c; };
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto rows = train_predictor(model, split, map, task, PredictLoss::Mse, cfg);
  EXPECT_EQ(rows[0].test_regret, 0.0);
  EXPECT_EQ(rows[0].test_mse, 0.0);
}

TEST(Training, TopIndices) {
  const auto idx = top_indices((Vector(4) << 0.1, 3.0, 2.0, 3.0).finished(), 2);
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_EQ(idx[0], 1);
  EXPECT_EQ(idx[1], 3);
}
