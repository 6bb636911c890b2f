#include "commands.hpp"

#include "foldcore/csv.hpp"
#include "foldcore/tasks/bilinear.hpp"
#include "foldcore/tasks/catalog.hpp"
#include "foldcore/tasks/portfolio.hpp"
#include "foldcore/tasks/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#ifndef FOLDCORE_VERSION
#define FOLDCORE_VERSION "unknown"
#endif

namespace foldcore::cli {

uint64_t derive_seed(uint64_t base, uint64_t stream) {
  // splitmix64 finalizer over the pair
  uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string RunManifest::run_id() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  mix(command);
  mix(std::to_string(seed));
  for (const auto& [k, v] : config) mix(k + "=" + v);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void RunManifest::write(const std::string& path, const std::string& csv_path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write manifest " + path);
  f << "run_id=" << run_id() << '\n';
  f << "command=" << command << '\n';
  f << "seed=" << seed << '\n';
  f << "csv=" << csv_path << '\n';
  f << "version=" << version << '\n';
  for (const auto& [k, v] : config) f << "config." << k << '=' << v << '\n';
  for (const auto& [k, v] : results) f << "result." << k << '=' << v << '\n';
  f << "wall_time_s=" << format_real(wall_time_s) << '\n';
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot read manifest " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Context {
  std::ostream& out;
  std::ostream& err;
  uint64_t seed = 0;
  Clock::time_point start = Clock::now();

  RunManifest manifest(const std::string& command) const {
    RunManifest m;
    m.command = command;
    m.seed = seed;
    m.version = FOLDCORE_VERSION;
    return m;
  }
  void finish(RunManifest& m, const std::string& csv) const {
    m.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
    m.write(csv + ".manifest", csv);
  }
};

std::string real(double v) { return format_real(v); }

void maybe_dump(const std::string& path, const Split& split) {
  if (path.empty()) return;
  write_dataset_csv(split.train, path + ".train.csv");
  write_dataset_csv(split.test, path + ".test.csv");
}

// ---- rate -----------------------------------------------------------------

struct RateArgs {
  std::string layer = "pgd-topk";
  std::string start = "fixed";
  int iters = 200;
  std::string out;
};

int cmd_rate(const RateArgs& a, const Context& ctx) {
  const RateSetup setup = make_rate_setup(a.layer, ctx.seed);
  const StartMode mode = a.start == "fixed" ? StartMode::FixedPoint : StartMode::Random;
  const TrajectoryRecord rec = rate_study(setup.layer, setup.c, mode, a.iters, derive_seed(ctx.seed, 3));

  CsvWriter csv(a.out, {"iter", "forward_rel_err", "backward_rel_err", "rho_estimate"});
  double max_fwd = 0.0;
  // Decay ratio over the stretch after the transient and above rounding.
  std::vector<double> tail;
  bool in_tail = true;
  for (const TrajectoryRow& r : rec.rows) {
    csv.row({static_cast<double>(r.iter), r.forward_rel_err, r.backward_rel_err, r.rho_estimate});
    max_fwd = std::max(max_fwd, r.forward_rel_err);
    if (r.iter <= 5) continue;
    in_tail = in_tail && r.backward_rel_err > 1e-10;
    if (in_tail) tail.push_back(r.backward_rel_err);
  }
  RunManifest m = ctx.manifest("rate");
  m.config = {{"layer", a.layer}, {"start", a.start}, {"iters", std::to_string(a.iters)}};
  m.results["rho"] = real(rec.rho);
  m.results["forward_tol"] = real(rec.forward_tol);
  m.results["max_forward_rel_err"] = real(max_fwd);
  m.results["final_backward_rel_err"] = real(rec.rows.back().backward_rel_err);
  ctx.out << "layer " << a.layer << " rho " << real(rec.rho) << " final_backward_rel_err "
          << real(rec.rows.back().backward_rel_err) << " max_forward_rel_err " << real(max_fwd);
  if (tail.size() >= 4) {
    const double ratio = decay_ratio(tail);
    m.results["decay_ratio"] = real(ratio);
    ctx.out << " decay_ratio " << real(ratio);
  }
  ctx.out << '\n';
  ctx.finish(m, a.out);
  return kOk;
}

// ---- checkgrad ------------------------------------------------------------

struct CheckArgs {
  std::string layer = "all";
  int trials = 20;
  std::string out;
};

int cmd_checkgrad(const CheckArgs& a, const Context& ctx) {
  const std::vector<std::string> layers = a.layer == "all" ? checkgrad_layer_names() : std::vector<std::string>{a.layer};
  std::vector<GradCheckResult> results;
  bool ok = true;
  for (const std::string& name : layers) {
    const GradCheckResult r = check_layer_gradients(name, a.trials, ctx.seed);
    ok = ok && r.passed();
    ctx.out << name << " trials " << r.trials << " rejected " << r.rejected << " step_dev " << real(r.step_deviation)
            << " e2e_dev " << real(r.e2e_deviation) << (r.passed() ? " PASS" : " FAIL") << '\n';
    results.push_back(r);
  }
  if (!a.out.empty()) {
    // Layer names are text, so this file is written directly.
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + a.out);
    f << "layer,trials,rejected,step_deviation,e2e_deviation,passed\n";
    for (const auto& r : results)
      f << r.layer << ',' << r.trials << ',' << r.rejected << ',' << real(r.step_deviation) << ','
        << real(r.e2e_deviation) << ',' << (r.passed() ? 1 : 0) << '\n';
    f.close();
    RunManifest m = ctx.manifest("checkgrad");
    m.config = {{"layer", a.layer}, {"trials", std::to_string(a.trials)}};
    m.results["passed"] = ok ? "1" : "0";
    ctx.finish(m, a.out);
  }
  return ok ? kOk : kCheckFailed;
}

// ---- training commands ----------------------------------------------------

struct TrainArgs {
  int epochs = 0;
  double lr = 0.0;
  int batch = 32;
  int points = 0;
  std::string out;
  std::string dataset_out;
};

TrainConfig train_config(const TrainArgs& a, uint64_t shuffle_seed) {
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.batch_size = a.batch;
  cfg.seed = shuffle_seed;
  cfg.validate();
  return cfg;
}

std::map<std::string, std::string> train_keys(const TrainArgs& a) {
  return {{"epochs", std::to_string(a.epochs)},
          {"lr", real(a.lr)},
          {"batch", std::to_string(a.batch)},
          {"points", std::to_string(a.points)}};
}

struct DenoiseArgs : TrainArgs {
  double lambda = 0.5;
  int length = 50;
};

int cmd_denoise(const DenoiseArgs& a, const Context& ctx) {
  const DenoiseData data = generate_denoise_data(derive_seed(ctx.seed, 0), a.points, a.length);
  maybe_dump(a.dataset_out, data.split);
  const DenoiseLayer layer(a.lambda);
  Matrix D = difference_operator(a.length);
  const auto rows = train_denoiser(D, layer, data, train_config(a, derive_seed(ctx.seed, 2)));

  CsvWriter csv(a.out, {"epoch", "train_mse", "test_mse"});
  for (const auto& r : rows) csv.row({static_cast<double>(r.epoch), r.train_mse, r.test_mse});
  std::vector<std::string> cols;
  for (Eigen::Index j = 0; j < D.cols(); ++j) cols.push_back("d" + std::to_string(j));
  CsvWriter ck(a.out + ".D.csv", cols);
  for (Eigen::Index i = 0; i < D.rows(); ++i) ck.row(std::vector<double>(D.row(i).begin(), D.row(i).end()));

  RunManifest m = ctx.manifest("denoise");
  m.config = train_keys(a);
  m.config["lambda"] = real(a.lambda);
  m.config["length"] = std::to_string(a.length);
  m.results["checkpoint"] = a.out + ".D.csv";
  m.results["initial_test_mse"] = real(rows.front().test_mse);
  m.results["final_test_mse"] = real(rows.back().test_mse);
  ctx.out << "denoise lambda " << real(a.lambda) << " test_mse " << real(rows.front().test_mse) << " -> "
          << real(rows.back().test_mse) << '\n';
  ctx.finish(m, a.out);
  return kOk;
}

struct PortfolioArgs : TrainArgs {
  int degree = 1;
};

int cmd_portfolio(const PortfolioArgs& a, const Context& ctx) {
  const PortfolioData data = generate_portfolio_data(derive_seed(ctx.seed, 0), a.degree, a.points);
  maybe_dump(a.dataset_out, data.split);
  const PortfolioDecision map(data.V, data.gamma);
  double budget = 0.0, negativity = 0.0, risk = -1e300;
  long decisions = 0;
  RegretTraining task;
  task.objective = portfolio_objective();
  task.observe = [&](const Vector& x) {
    budget = std::max(budget, std::abs(x.sum() - 1.0));
    negativity = std::max(negativity, -x.minCoeff());
    risk = std::max(risk, x.dot(data.V * x) - data.gamma);
    ++decisions;
  };
  const TrainConfig cfg = train_config(a, derive_seed(ctx.seed, 2));
  const Eigen::Index f = data.split.train.features.cols(), n = data.V.rows();
  std::vector<RegretEpoch> runs[2];
  for (int k = 0; k < 2; ++k) {
    Mlp model = Mlp::init({f, 32, 32, n}, Activation::Relu, Activation::Identity, derive_seed(ctx.seed, 1));
    runs[k] = train_predictor(model, data.split, map, task, k == 0 ? PredictLoss::Regret : PredictLoss::Mse, cfg);
  }
  CsvWriter csv(a.out, {"epoch", "integrated_train_regret", "integrated_test_regret", "two_stage_train_regret",
                        "two_stage_test_regret"});
  for (size_t e = 0; e < runs[0].size(); ++e)
    csv.row({static_cast<double>(e), runs[0][e].train_regret, runs[0][e].test_regret, runs[1][e].train_regret,
             runs[1][e].test_regret});

  RunManifest m = ctx.manifest("portfolio");
  m.config = train_keys(a);
  m.config["degree"] = std::to_string(a.degree);
  m.results["decisions"] = std::to_string(decisions);
  m.results["max_budget_violation"] = real(budget);
  m.results["max_negativity"] = real(negativity);
  m.results["max_risk_excess"] = real(risk);
  ctx.out << "portfolio degree " << a.degree << " integrated test_regret " << real(runs[0].front().test_regret)
          << " -> " << real(runs[0].back().test_regret) << " two_stage " << real(runs[1].back().test_regret) << '\n';
  ctx.finish(m, a.out);
  if (budget > 1e-6 || negativity > 1e-8 || risk > 1e-6) {
    ctx.err << "portfolio: infeasible decision (budget " << real(budget) << ", negativity " << real(negativity)
            << ", risk excess " << real(risk) << ")\n";
    return kNumerical;
  }
  return kOk;
}

struct BilinearArgs : TrainArgs {
  int seeds = 5;
  double mu = BilinearConfig{}.mu;
};

int cmd_bilinear(const BilinearArgs& a, const Context& ctx) {
  if (a.seeds < 1) throw Error(ErrorCode::InvalidArgument, "bilinear: --seeds must be >= 1");
  CsvWriter csv(a.out, {"seed", "epoch", "integrated_train_regret", "integrated_test_regret", "two_stage_train_regret",
                        "two_stage_test_regret"});
  double sum[2] = {0.0, 0.0};
  for (int s = 0; s < a.seeds; ++s) {
    const uint64_t run_seed = ctx.seed + static_cast<uint64_t>(s);
    const BilinearData data = generate_bilinear_data(derive_seed(run_seed, 0), a.points);
    if (s == 0) maybe_dump(a.dataset_out, data.split);
    BilinearConfig bc;
    bc.mu = a.mu;
    const BilinearLayer layer(data.Q, bc);
    RegretTraining task;
    task.objective = layer.objective();
    task.refine_truth = true;
    const TrainConfig cfg = train_config(a, derive_seed(run_seed, 2));
    const Eigen::Index f = data.split.train.features.cols(), n = 2 * data.n;
    std::vector<RegretEpoch> runs[2];
    for (int k = 0; k < 2; ++k) {
      Mlp model =
          Mlp::init({f, 32, 32, 32, 32, n}, Activation::Relu, Activation::Identity, derive_seed(run_seed, 1));
      runs[k] = train_predictor(model, data.split, layer, task, k == 0 ? PredictLoss::Regret : PredictLoss::Mse, cfg);
      sum[k] += runs[k].back().test_regret;
    }
    for (size_t e = 0; e < runs[0].size(); ++e)
      csv.row({static_cast<double>(run_seed), static_cast<double>(e), runs[0][e].train_regret, runs[0][e].test_regret,
               runs[1][e].train_regret, runs[1][e].test_regret});
  }
  RunManifest m = ctx.manifest("bilinear");
  m.config = train_keys(a);
  m.config["seeds"] = std::to_string(a.seeds);
  m.config["mu"] = real(a.mu);
  const double mi = sum[0] / a.seeds, mt = sum[1] / a.seeds;
  m.results["mean_final_integrated_test_regret"] = real(mi);
  m.results["mean_final_two_stage_test_regret"] = real(mt);
  ctx.out << "bilinear mean final test_regret integrated " << real(mi) << " two_stage " << real(mt) << '\n';
  ctx.finish(m, a.out);
  return kOk;
}

int cmd_topk(const TrainArgs& a, const Context& ctx) {
  const TopkData data = generate_topk_data(derive_seed(ctx.seed, 0), a.points);
  maybe_dump(a.dataset_out, data.split);
  const Eigen::Index f = data.split.train.features.cols(), n = data.split.train.targets.cols();
  Mlp model = Mlp::init({f, n}, Activation::Identity, Activation::Identity, derive_seed(ctx.seed, 1));
  double sum_err = 0.0, bound_err = 0.0;
  const double k = static_cast<double>(data.k);
  const auto rows = train_topk(model, data, train_config(a, derive_seed(ctx.seed, 2)), [&](const Vector& x) {
    sum_err = std::max(sum_err, std::abs(x.sum() - k));
    bound_err = std::max({bound_err, -x.minCoeff(), x.maxCoeff() - 1.0});
  });
  CsvWriter csv(a.out, {"epoch", "train_loss", "test_loss", "test_recovery"});
  for (const auto& r : rows)
    csv.row({static_cast<double>(r.epoch), r.train_loss, r.test_loss, r.test_recovery});
  RunManifest m = ctx.manifest("topk");
  m.config = train_keys(a);
  m.results["final_test_recovery"] = real(rows.back().test_recovery);
  m.results["max_sum_violation"] = real(sum_err);
  m.results["max_bound_violation"] = real(bound_err);
  ctx.out << "topk test_recovery " << real(rows.front().test_recovery) << " -> " << real(rows.back().test_recovery)
          << '\n';
  ctx.finish(m, a.out);
  if (sum_err > 1e-6 || bound_err > 1e-6) {
    ctx.err << "topk: infeasible decision\n";
    return kNumerical;
  }
  return kOk;
}

void add_train_options(CLI::App* sub, TrainArgs& a, int epochs, double lr, int points) {
  a.epochs = epochs;
  a.lr = lr;
  a.points = points;
  sub->add_option("--epochs", a.epochs, "training epochs")->check(CLI::NonNegativeNumber);
  sub->add_option("--lr", a.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--batch", a.batch, "mini-batch size")->check(CLI::PositiveNumber);
  sub->add_option("--points", a.points, "dataset size (train + test)")->check(CLI::Range(10, 1000000));
  sub->add_option("--out", a.out, "output CSV")->required();
  sub->add_option("--dataset-out", a.dataset_out, "also write the generated data to PREFIX.{train,test}.csv");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fixed-point folding experiments and diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FOLDCORE_VERSION);
  uint64_t seed = 0;
  app.add_option("--seed", seed, "base seed (FOLDCORE_SEED overrides)");

  RateArgs ra;
  auto* rate = app.add_subcommand("rate", "forward/backward error along an unrolled trajectory");
  rate->add_option("--layer", ra.layer)->check(CLI::IsMember(rate_layer_names()));
  rate->add_option("--start", ra.start)->check(CLI::IsMember({"fixed", "random"}));
  rate->add_option("--iters", ra.iters)->check(CLI::Range(1, 100000));
  rate->add_option("--out", ra.out, "output CSV")->required();

  CheckArgs ca;
  auto* check = app.add_subcommand("checkgrad", "compare layer VJPs with finite differences");
  check->add_option("--layer", ca.layer, "layer name or 'all'")->check([](const std::string& s) {
    return s == "all" || is_checkgrad_layer(s) ? std::string() : "unknown layer " + s;
  });
  check->add_option("--trials", ca.trials)->check(CLI::Range(1, 100000));
  check->add_option("--out", ca.out, "optional CSV of per-layer results");

  DenoiseArgs da;
  auto* denoise = app.add_subcommand("denoise", "learn the analysis operator of a TV denoiser");
  add_train_options(denoise, da, 30, 1e-3, 200);
  denoise->add_option("--lambda", da.lambda)->check(CLI::NonNegativeNumber);
  denoise->add_option("--length", da.length, "signal length")->check(CLI::Range(2, 10000));

  PortfolioArgs pa;
  auto* portfolio = app.add_subcommand("portfolio", "risk-constrained portfolio, integrated vs two-stage");
  add_train_options(portfolio, pa, 10, 1e-2, 200);
  portfolio->add_option("--degree", pa.degree)->check(CLI::Range(1, 3));

  BilinearArgs ba;
  auto* bilinear = app.add_subcommand("bilinear", "nonconvex bilinear program, integrated vs two-stage");
  add_train_options(bilinear, ba, 5, 1e-2, 200);
  bilinear->add_option("--seeds", ba.seeds)->check(CLI::Range(1, 1000));
  bilinear->add_option("--mu", ba.mu, "quadratic smoothing weight")->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* topk = app.add_subcommand("topk", "top-k classifier through the smoothed top-k layer");
  add_train_options(topk, ta, 30, 0.05, 1000);

  // Seed is accepted before or after the subcommand name.
  for (CLI::App* sub : {rate, check, denoise, portfolio, bilinear, topk})
    sub->add_option("--seed", seed, "base seed (FOLDCORE_SEED overrides)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << FOLDCORE_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  if (const char* env = std::getenv("FOLDCORE_SEED")) {
    try {
      size_t used = 0;
      const std::string s(env);
      seed = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      err << "usage error: FOLDCORE_SEED is not an unsigned integer\n";
      return kUsage;
    }
  }

  Context ctx{out, err, seed};
  try {
    if (rate->parsed()) return cmd_rate(ra, ctx);
    if (check->parsed()) return cmd_checkgrad(ca, ctx);
    if (denoise->parsed()) return cmd_denoise(da, ctx);
    if (portfolio->parsed()) return cmd_portfolio(pa, ctx);
    if (bilinear->parsed()) return cmd_bilinear(ba, ctx);
    if (topk->parsed()) return cmd_topk(ta, ctx);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidArgument ? kUsage : kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}

}  // namespace foldcore::cli
