#pragma once

#include "foldcore/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace foldcore {

// One sample per row.
struct Dataset {
  Matrix features;
  Matrix targets;
  Eigen::Index size() const { return features.rows(); }
};

struct Split {
  Dataset train, test;
};

// First ⌈train_frac·N⌉ rows train, the rest test (generators already draw
// samples i.i.d., so no shuffle is needed).
Split split_dataset(const Dataset& all, double train_frac = 0.9);

// Affine map of tanh outputs (−1, 1) into the log-safe interval (0.05, 2).
double bilinear_rescale(double z);
// x cos 2x + (5/2) log(x/(x+2)) + x² sin 4x
double bilinear_nonlinearity(double x);

struct BilinearData {
  Split split;
  Matrix Q;  // n × n interaction matrix of the program
  Eigen::Index n = 0;
};

// Features uniform in [−2, 2]^feature_dim, fed through a random two-layer
// tanh network, rescaled and passed through the nonlinearity; targets are
// the 2n costs (c for x, d for y). Q is normal, rescaled to spectral norm
// q_norm.
BilinearData generate_bilinear_data(uint64_t seed, Eigen::Index n_points = 200, Eigen::Index feature_dim = 10,
                                    Eigen::Index n = 5, double q_norm = 4.5);

struct PortfolioData {
  Split split;
  Matrix V;  // asset covariance, FᵀF + εI
  double gamma = 0.0;
  double epsilon = 0.0;
};

// Prices from a random 0/1 linear map of normal features raised to
// `degree`: cⱼ = (0.05/√p·(Bx)ⱼ + 0.1^{1/deg})^deg. γ is twice the risk of
// the uniform portfolio.
PortfolioData generate_portfolio_data(uint64_t seed, int degree, Eigen::Index n_points = 200,
                                      Eigen::Index feature_dim = 5, Eigen::Index n_assets = 6);

struct DenoiseData {
  Split split;  // features = noisy signal, targets = clean signal
};

// Piecewise-constant clean signals (a few jumps, levels N(0, 3²)) plus
// standard-normal noise.
DenoiseData generate_denoise_data(uint64_t seed, Eigen::Index n_signals = 200, Eigen::Index length = 50);

// Differencing operator, (n−1) × n with D_{i,i} = 1, D_{i,i+1} = −1.
Matrix difference_operator(Eigen::Index n);

struct TopkData {
  Split split;            // targets: 0/1 indicator of the k largest true scores
  Matrix true_weights;    // n × feature_dim
  Eigen::Index k = 0;
};

// Normal embeddings scored by a random linear map; labels are the top-k
// indicator of those scores, so a linear model can separate them. Samples
// whose k-th and (k+1)-th scores are closer than `margin` are redrawn.
TopkData generate_topk_data(uint64_t seed, Eigen::Index n_points = 300, Eigen::Index feature_dim = 8,
                            Eigen::Index n = 5, Eigen::Index k = 2, double margin = 0.5);

// Headered CSV with one sample per row: f0..f{F-1}, t0..t{T-1}.
void write_dataset_csv(const Dataset& d, const std::string& path);

}  // namespace foldcore
