#include "foldcore/tasks/training.hpp"

#include "foldcore/rng.hpp"

#include <algorithm>
#include <numeric>

namespace foldcore {

namespace {

std::vector<Eigen::Index> shuffled(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = n - 1; i > 0; --i)
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.below(static_cast<uint64_t>(i + 1)))]);
  return idx;
}

// Runs batches over a shuffled order; `sample` adds one sample's gradient
// into grad and returns its loss, `commit` pushes updated parameters back
// into the model.
template <class Sample, class Commit>
double run_epoch(Vector& params, Optimizer& opt, Eigen::Index n, int batch, Rng& rng, Sample&& sample,
                 Commit&& commit) {
  const std::vector<Eigen::Index> order = shuffled(n, rng);
  double total = 0.0;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch)) {
    const size_t end = std::min(order.size(), start + static_cast<size_t>(batch));
    std::vector<Eigen::Index> members(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
    std::sort(members.begin(), members.end());
    Vector grad = Vector::Zero(params.size());
    for (Eigen::Index i : members) total += sample(i, grad);
    grad /= static_cast<double>(members.size());
    if (!all_finite(grad)) throw Error(ErrorCode::NonFiniteGradient, "training gradient is not finite");
    opt.step(params, grad);
    commit(params);
  }
  return total / static_cast<double>(n);
}

}  // namespace

std::vector<RegretEpoch> train_predictor(Mlp& model, const Split& data, const DecisionMap& map,
                                         const RegretTraining& task, PredictLoss loss, const TrainConfig& cfg) {
  cfg.validate();
  const Dataset& tr = data.train;
  const Dataset& te = data.test;
  auto truths = [&](const Dataset& d) {
    std::vector<Vector> xs;
    for (Eigen::Index i = 0; i < d.size(); ++i) xs.push_back(map.decide(d.targets.row(i).transpose()));
    return xs;
  };
  std::vector<Vector> xt_train = truths(tr), xt_test = truths(te);

  auto one_regret = [&](const Vector& c_hat, const Vector& c_bar, Vector& x_true, bool grad) {
    RegretValue r = regret(c_hat, c_bar, map, task.objective, grad, &x_true);
    if (task.observe) task.observe(r.decision);
    if (task.refine_truth && r.regret < 0.0) {
      x_true = r.decision;
      r.regret = 0.0;
    }
    return r;
  };
  auto mean_regret = [&](const Dataset& d, std::vector<Vector>& xt) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      s += one_regret(model.forward(d.features.row(i).transpose()), d.targets.row(i).transpose(),
                      xt[static_cast<size_t>(i)], false)
               .regret;
    return d.size() ? s / static_cast<double>(d.size()) : 0.0;
  };
  auto mean_mse = [&](const Dataset& d) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i)
      s += mse(model.forward(d.features.row(i).transpose()), d.targets.row(i).transpose()).value;
    return d.size() ? s / static_cast<double>(d.size()) : 0.0;
  };

  std::vector<RegretEpoch> rows;
  RegretEpoch r0;
  r0.train_regret = mean_regret(tr, xt_train);
  r0.test_regret = mean_regret(te, xt_test);
  r0.train_mse = mean_mse(tr);
  r0.test_mse = mean_mse(te);
  r0.train_loss = loss == PredictLoss::Regret ? r0.train_regret : r0.train_mse;
  rows.push_back(r0);

  Rng rng(cfg.seed);
  auto opt = make_optimizer(cfg, model.param_count());
  auto commit_model = [&](const Vector& p) { model.set_params(p); };
  for (int ep = 1; ep <= cfg.epochs; ++ep) {
    Vector params = model.params();
    auto sample = [&](Eigen::Index i, Vector& grad) {
      Mlp::Tape tape;
      const Vector c_hat = model.forward(tr.features.row(i).transpose(), tape);
      const Vector c_bar = tr.targets.row(i).transpose();
      if (loss == PredictLoss::Mse) {
        const LossValue l = mse(c_hat, c_bar);
        model.backward(tape, l.grad, grad);
        return l.value;
      }
      const RegretValue rv = one_regret(c_hat, c_bar, xt_train[static_cast<size_t>(i)], true);
      model.backward(tape, rv.grad, grad);
      return rv.regret;
    };
    RegretEpoch row;
    row.epoch = ep;
    row.train_loss = run_epoch(params, *opt, tr.size(), cfg.batch_size, rng, sample, commit_model);
    row.train_regret = mean_regret(tr, xt_train);
    row.test_regret = mean_regret(te, xt_test);
    row.train_mse = mean_mse(tr);
    row.test_mse = mean_mse(te);
    rows.push_back(row);
  }
  return rows;
}

std::vector<Eigen::Index> top_indices(const Vector& v, Eigen::Index k) {
  std::vector<Eigen::Index> idx(static_cast<size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) > v(b); });
  idx.resize(static_cast<size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<TopkEpoch> train_topk(Mlp& model, const TopkData& data, const TrainConfig& cfg,
                                  const std::function<void(const Vector&)>& observe) {
  cfg.validate();
  const Eigen::Index n = data.split.train.targets.cols();
  const TopkDecision map(n, static_cast<double>(data.k));
  auto evaluate = [&](const Dataset& d, double& loss_out, double& recovery_out) {
    double l = 0.0, rec = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const Vector x = map.decide(model.forward(d.features.row(i).transpose()));
      if (observe) observe(x);
      const Vector y = d.targets.row(i).transpose();
      l += binary_cross_entropy(x, y).value;
      const auto pred = top_indices(x, data.k), truth = top_indices(y, data.k);
      std::vector<Eigen::Index> both;
      std::set_intersection(pred.begin(), pred.end(), truth.begin(), truth.end(), std::back_inserter(both));
      rec += static_cast<double>(both.size()) / static_cast<double>(data.k);
    }
    loss_out = d.size() ? l / static_cast<double>(d.size()) : 0.0;
    recovery_out = d.size() ? rec / static_cast<double>(d.size()) : 0.0;
  };

  std::vector<TopkEpoch> rows;
  TopkEpoch r0;
  double unused = 0.0;
  evaluate(data.split.train, r0.train_loss, unused);
  evaluate(data.split.test, r0.test_loss, r0.test_recovery);
  rows.push_back(r0);

  Rng rng(cfg.seed);
  auto opt = make_optimizer(cfg, model.param_count());
  auto commit_model = [&](const Vector& p) { model.set_params(p); };
  const Dataset& tr = data.split.train;
  for (int ep = 1; ep <= cfg.epochs; ++ep) {
    Vector params = model.params();
    auto sample = [&](Eigen::Index i, Vector& grad) {
      Mlp::Tape tape;
      const Vector c = model.forward(tr.features.row(i).transpose(), tape);
      const Vector x = map.decide(c);
      if (observe) observe(x);
      const LossValue l = binary_cross_entropy(x, tr.targets.row(i).transpose());
      model.backward(tape, map.decide_vjp(c, x, l.grad), grad);
      return l.value;
    };
    TopkEpoch row;
    row.epoch = ep;
    row.train_loss = run_epoch(params, *opt, tr.size(), cfg.batch_size, rng, sample, commit_model);
    evaluate(data.split.test, row.test_loss, row.test_recovery);
    rows.push_back(row);
  }
  return rows;
}

double denoise_mse(const Matrix& D, const DenoiseLayer& layer, const Dataset& set) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < set.size(); ++i)
    s += mse(layer.forward(D, set.features.row(i).transpose()).u, set.targets.row(i).transpose()).value;
  return set.size() ? s / static_cast<double>(set.size()) : 0.0;
}

std::vector<DenoiseEpoch> train_denoiser(Matrix& D, const DenoiseLayer& layer, const DenoiseData& data,
                                         const TrainConfig& cfg) {
  cfg.validate();
  const Dataset& tr = data.split.train;
  std::vector<DenoiseEpoch> rows;
  rows.push_back({0, denoise_mse(D, layer, tr), denoise_mse(D, layer, data.split.test)});
  Rng rng(cfg.seed);
  auto opt = make_optimizer(cfg, D.size());
  for (int ep = 1; ep <= cfg.epochs; ++ep) {
    Vector params = flatten_row_major(D);
    auto sample = [&](Eigen::Index i, Vector& grad) {
      const Vector noisy = tr.features.row(i).transpose();
      const auto out = layer.forward(D, noisy);
      const LossValue l = mse(out.u, tr.targets.row(i).transpose());
      grad += flatten_row_major(layer.vjp(D, noisy, out, l.grad));
      return l.value;
    };
    run_epoch(params, *opt, tr.size(), cfg.batch_size, rng, sample,
              [&](const Vector& p) { D = Eigen::Map<const Matrix>(p.data(), D.rows(), D.cols()); });
    rows.push_back({ep, denoise_mse(D, layer, tr), denoise_mse(D, layer, data.split.test)});
  }
  return rows;
}

}  // namespace foldcore
