#pragma once

#include "foldcore/learning/data.hpp"
#include "foldcore/learning/losses.hpp"
#include "foldcore/learning/mlp.hpp"
#include "foldcore/learning/optim.hpp"
#include "foldcore/tasks/denoise.hpp"
#include "foldcore/tasks/topk.hpp"

#include <functional>
#include <vector>

namespace foldcore {

enum class PredictLoss {
  Regret,  // integrated: backpropagate the decision regret through the layer
  Mse,     // two-stage: fit the costs, decide separately
};

struct RegretEpoch {
  int epoch = 0;
  double train_loss = 0.0;  // mean training loss over the epoch (at init for epoch 0)
  double train_regret = 0.0;
  double test_regret = 0.0;
  double train_mse = 0.0;  // of the predicted costs
  double test_mse = 0.0;
};

struct RegretTraining {
  DecisionObjective objective;
  // Keep the better of the cached x*(c̄) and any decision that beats it
  // under c̄. Only useful when the forward solver may stop at a local optimum.
  bool refine_truth = false;
  // Called on every decision the layer produces.
  std::function<void(const Vector& decision)> observe;
};

// Trains `model` (features → predicted costs) with mini-batch gradients,
// shuffled per epoch from cfg.seed, gradients summed in sample order.
// Returns one row per epoch, epoch 0 being the untrained model.
std::vector<RegretEpoch> train_predictor(Mlp& model, const Split& data, const DecisionMap& map,
                                         const RegretTraining& task, PredictLoss loss, const TrainConfig& cfg);

struct TopkEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_recovery = 0.0;  // mean |predicted top-k ∩ true top-k| / k
};

// Indices of the k largest entries (ties to the lower index).
std::vector<Eigen::Index> top_indices(const Vector& v, Eigen::Index k);

std::vector<TopkEpoch> train_topk(Mlp& model, const TopkData& data, const TrainConfig& cfg,
                                  const std::function<void(const Vector&)>& observe = {});

struct DenoiseEpoch {
  int epoch = 0;
  double train_mse = 0.0;
  double test_mse = 0.0;
};

// Learns D for the denoiser by minimizing MSE(u*(D; noisy), clean).
std::vector<DenoiseEpoch> train_denoiser(Matrix& D, const DenoiseLayer& layer, const DenoiseData& data,
                                         const TrainConfig& cfg);
double denoise_mse(const Matrix& D, const DenoiseLayer& layer, const Dataset& set);

}  // namespace foldcore
