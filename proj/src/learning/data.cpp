#include "foldcore/learning/data.hpp"

#include "foldcore/csv.hpp"
#include "foldcore/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace foldcore {

Split split_dataset(const Dataset& all, double train_frac) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error(ErrorCode::InvalidArgument, "split fraction must be in (0, 1)");
  const Eigen::Index n = all.size();
  const Eigen::Index ntr = static_cast<Eigen::Index>(std::ceil(train_frac * static_cast<double>(n)));
  if (ntr >= n) throw Error(ErrorCode::InvalidArgument, "split leaves no test samples");
  Split s;
  s.train.features = all.features.topRows(ntr);
  s.train.targets = all.targets.topRows(ntr);
  s.test.features = all.features.bottomRows(n - ntr);
  s.test.targets = all.targets.bottomRows(n - ntr);
  return s;
}

double bilinear_rescale(double z) { return 0.05 + 0.975 * (1.0 + z); }

double bilinear_nonlinearity(double x) {
  if (!(x > 0.0)) throw Error(ErrorCode::InvalidArgument, "bilinear nonlinearity needs x > 0");
  return x * std::cos(2.0 * x) + 2.5 * std::log(x / (x + 2.0)) + x * x * std::sin(4.0 * x);
}

BilinearData generate_bilinear_data(uint64_t seed, Eigen::Index n_points, Eigen::Index feature_dim, Eigen::Index n,
                                    double q_norm) {
  Rng rng(seed);
  const Eigen::Index hidden = 16;
  const Matrix W1 = rng.normal_matrix(hidden, feature_dim) / std::sqrt(static_cast<double>(feature_dim));
  const Vector b1 = rng.normal_vector(hidden);
  const Matrix W2 = rng.normal_matrix(2 * n, hidden) / std::sqrt(static_cast<double>(hidden));
  const Vector b2 = rng.normal_vector(2 * n) * 0.5;
  Dataset all;
  all.features = rng.uniform_matrix(n_points, feature_dim, -2.0, 2.0);
  all.targets.resize(n_points, 2 * n);
  for (Eigen::Index i = 0; i < n_points; ++i) {
    const Vector h = (W1 * all.features.row(i).transpose() + b1).array().tanh().matrix();
    const Vector z = (W2 * h + b2).array().tanh().matrix();
    for (Eigen::Index j = 0; j < 2 * n; ++j) all.targets(i, j) = bilinear_nonlinearity(bilinear_rescale(z(j)));
  }
  BilinearData out;
  out.n = n;
  out.Q = rng.normal_matrix(n, n);
  out.Q *= q_norm / Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(out.Q)).singularValues()(0);
  out.split = split_dataset(all);
  return out;
}

PortfolioData generate_portfolio_data(uint64_t seed, int degree, Eigen::Index n_points, Eigen::Index feature_dim,
                                      Eigen::Index n_assets) {
  if (degree < 1 || degree > 3) throw Error(ErrorCode::InvalidArgument, "portfolio degree must be 1, 2 or 3");
  Rng rng(seed);
  Matrix B(n_assets, feature_dim);
  for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  const double base = std::pow(0.1, 1.0 / degree);
  const double scale = 0.05 / std::sqrt(static_cast<double>(feature_dim));
  Dataset all;
  all.features = rng.normal_matrix(n_points, feature_dim);
  all.targets.resize(n_points, n_assets);
  for (Eigen::Index i = 0; i < n_points; ++i) {
    const Vector lin = scale * (B * all.features.row(i).transpose()).array() + base;
    all.targets.row(i) = lin.array().pow(static_cast<double>(degree)).matrix().transpose();
  }
  PortfolioData out;
  const Matrix F = 0.05 * rng.normal_matrix(n_assets, n_assets);
  out.epsilon = 1e-3;
  out.V = F.transpose() * F + out.epsilon * Matrix::Identity(n_assets, n_assets);
  const Vector u = Vector::Constant(n_assets, 1.0 / static_cast<double>(n_assets));
  out.gamma = 2.0 * u.dot(out.V * u);
  out.split = split_dataset(all);
  return out;
}

Matrix difference_operator(Eigen::Index n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "difference operator needs n >= 2");
  Matrix D = Matrix::Zero(n - 1, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    D(i, i) = 1.0;
    D(i, i + 1) = -1.0;
  }
  return D;
}

DenoiseData generate_denoise_data(uint64_t seed, Eigen::Index n_signals, Eigen::Index length) {
  Rng rng(seed);
  Dataset all;
  all.targets.resize(n_signals, length);
  all.features.resize(n_signals, length);
  for (Eigen::Index i = 0; i < n_signals; ++i) {
    const int jumps = 1 + static_cast<int>(rng.below(4));
    std::vector<Eigen::Index> at;
    for (int j = 0; j < jumps; ++j) at.push_back(1 + static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(length - 1))));
    std::sort(at.begin(), at.end());
    double level = 3.0 * rng.normal();
    size_t next = 0;
    for (Eigen::Index t = 0; t < length; ++t) {
      while (next < at.size() && at[next] == t) {
        level = 3.0 * rng.normal();
        ++next;
      }
      all.targets(i, t) = level;
    }
    for (Eigen::Index t = 0; t < length; ++t) all.features(i, t) = all.targets(i, t) + rng.normal();
  }
  DenoiseData out;
  out.split = split_dataset(all);
  return out;
}

TopkData generate_topk_data(uint64_t seed, Eigen::Index n_points, Eigen::Index feature_dim, Eigen::Index n,
                            Eigen::Index k, double margin) {
  if (k < 1 || k >= n) throw Error(ErrorCode::InvalidArgument, "top-k data needs 1 <= k < n");
  if (margin < 0.0) throw Error(ErrorCode::InvalidArgument, "top-k data needs margin >= 0");
  Rng rng(seed);
  TopkData out;
  out.k = k;
  out.true_weights = rng.normal_matrix(n, feature_dim);
  Dataset all;
  all.features = Matrix::Zero(n_points, feature_dim);
  all.targets = Matrix::Zero(n_points, n);
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n_points;) {
    const Vector f = rng.normal_vector(feature_dim);
    const Vector s = out.true_weights * f;
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return s(a) > s(b); });
    if (s(idx[static_cast<size_t>(k - 1)]) - s(idx[static_cast<size_t>(k)]) < margin) continue;
    all.features.row(i) = f.transpose();
    for (Eigen::Index j = 0; j < k; ++j) all.targets(i, idx[static_cast<size_t>(j)]) = 1.0;
    ++i;
  }
  out.split = split_dataset(all);
  return out;
}

void write_dataset_csv(const Dataset& d, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  for (Eigen::Index j = 0; j < d.features.cols(); ++j) f << (j ? "," : "") << "f" << j;
  for (Eigen::Index j = 0; j < d.targets.cols(); ++j) f << ",t" << j;
  f << "\n";
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    for (Eigen::Index j = 0; j < d.features.cols(); ++j) f << (j ? "," : "") << format_real(d.features(i, j));
    for (Eigen::Index j = 0; j < d.targets.cols(); ++j) f << "," << format_real(d.targets(i, j));
    f << "\n";
  }
}

}  // namespace foldcore
