#include "foldcore/tasks/catalog.hpp"

#include "foldcore/learning/data.hpp"
#include "foldcore/rng.hpp"
#include "foldcore/tasks/bilinear.hpp"
#include "foldcore/tasks/denoise.hpp"
#include "foldcore/tasks/portfolio.hpp"
#include "foldcore/tasks/qp_layer.hpp"
#include "foldcore/tasks/topk.hpp"

#include <algorithm>
#include <cmath>

namespace foldcore {

namespace {

SolveReport fixed_report(Vector x) {
  SolveReport r;
  r.x_star = std::move(x);
  r.converged = true;
  return r;
}

RateSetup topk_rate(uint64_t seed) {
  Rng rng(seed);
  const Eigen::Index n = 5;
  const double k = 2.0;
  const Vector c = 0.5 * rng.normal_vector(n);
  const Vector x = topk_forward(c, k);
  FoldingOptions o;
  o.forward_tol = 1e-12;
  return {"pgd-topk", make_topk_layer(n, k, topk_step_size(x), o), c};
}

RateSetup admm_rate(uint64_t seed) {
  Rng rng(seed + 1);
  const QpStandard qp = random_standard_qp(rng, 4, 1);
  AdmmLayerOptions o;
  o.exact_forward = true;
  // Scaling the curvature down keeps ADMM at ρ = 1 in its fast regime.
  QpStandard scaled = qp;
  scaled.Q = qp.Q / qp.Q.diagonal().mean();
  AdmmQpLayer layer(scaled, o);
  return {"admm-qp", layer.layer(), scaled.p};
}

RateSetup fdpg_rate(uint64_t seed) {
  Rng rng(seed + 2);
  const Eigen::Index n = 5;
  const Matrix D = difference_operator(n);
  // Two flat pieces with a jump: the pieces fuse (free duals), the jump
  // stays (active dual).
  Vector d(n);
  d << 0.0, 0.0, 0.0, 2.0, 2.0;
  d += 0.1 * rng.normal_vector(n);
  const double lambda = 0.3;
  const double L = fdpg_lipschitz(D);
  // t = 1 gives the momentum-free dual step, whose Φ is the contraction the
  // rate is measured on.
  auto step = std::make_shared<FdpgStep>(D.rows(), n, d, lambda, L, 1.0);
  FoldingOptions o;
  o.forward_tol = 1e-11;
  FoldedLayer layer(
      step,
      [d, lambda, L, m = D.rows(), n](const Vector& c, const Vector*) {
        const Matrix Dc = Eigen::Map<const Matrix>(c.data(), m, n);
        FdpgConfig cfg;
        cfg.lambda = lambda;
        cfg.lipschitz = L;
        cfg.tol = 1e-13;
        const FdpgResult r = fdpg_solve(Dc, d, cfg);
        Vector s(2 * m);
        s << r.w, r.w;
        SolveReport rep = fixed_report(s);
        rep.iterations = r.iterations;
        rep.converged = r.converged;
        return rep;
      },
      o);
  return {"fdpg", std::move(layer), flatten_row_major(D)};
}

RateSetup scalar_rate() {
  Matrix A(1, 1), B(1, 1);
  A(0, 0) = 0.5;
  B(0, 0) = 1.0;
  auto step = make_affine_step(A, B, Vector::Zero(1));
  FoldingOptions o;
  o.forward_tol = 1e-14;
  FoldedLayer layer(step, [](const Vector& c, const Vector*) { return fixed_report(2.0 * c); }, o);
  return {"scalar", std::move(layer), Vector::Constant(1, 0.7)};
}

// One sampled parameter point of a layer, with everything the checks need.
struct Trial {
  Vector c;
  std::function<Vector(const Vector&)> decide;
  std::function<Vector(const Vector& c, const Vector& x, const Vector& g)> vjp;
  // Discrete description of the active constraints; an empty result marks
  // a point to reject outright.
  std::function<std::vector<int>(const Vector& c, const Vector& x)> pattern;
  std::function<StepCheck(const Vector& c, const Vector& x)> step_check;
};

std::vector<int> bound_pattern(const Vector& x, double lo_tol, double hi = 1.0, bool upper = false) {
  std::vector<int> p(static_cast<size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    int code = 0;
    if (x(i) <= lo_tol) code = 1;
    if (upper && x(i) >= hi - lo_tol) code = 2;
    p[static_cast<size_t>(i)] = code;
  }
  return p;
}

// A step whose parameter VJP is 10% too large.
class ScaledParamStep : public DifferentiableStep {
 public:
  ScaledParamStep(std::shared_ptr<const DifferentiableStep> inner, double scale) : inner_(std::move(inner)), scale_(scale) {}
  Eigen::Index state_dim() const override { return inner_->state_dim(); }
  Eigen::Index param_dim() const override { return inner_->param_dim(); }
  Vector forward(const Vector& x, const Vector& c) const override { return inner_->forward(x, c); }
  std::unique_ptr<StepLinearization> linearize(const Vector& x, const Vector& c) const override {
    return std::make_unique<Lin>(inner_->linearize(x, c), scale_);
  }

 private:
  struct Lin : StepLinearization {
    Lin(std::unique_ptr<StepLinearization> in, double s) : inner(std::move(in)), scale(s) {}
    Vector vjp_state(const Vector& v) const override { return inner->vjp_state(v); }
    Vector vjp_param(const Vector& v) const override { return scale * inner->vjp_param(v); }
    std::unique_ptr<StepLinearization> inner;
    double scale;
  };
  std::shared_ptr<const DifferentiableStep> inner_;
  double scale_;
};

using TrialMaker = std::function<Trial(Rng&)>;

TrialMaker identity_trials() {
  auto step = make_affine_step(Matrix::Zero(4, 4), Matrix::Identity(4, 4), Vector::Zero(4));
  auto layer = std::make_shared<FoldedLayer>(
      step, [](const Vector& c, const Vector*) { return fixed_report(c); }, FoldingOptions{});
  return [step, layer](Rng& rng) {
    Trial t;
    t.c = rng.normal_vector(4);
    t.decide = [](const Vector& c) { return c; };
    t.vjp = [layer](const Vector& c, const Vector& x, const Vector& g) { return layer->backward_vjp(c, x, g).grad_c; };
    t.pattern = [](const Vector&, const Vector&) { return std::vector<int>{0}; };
    t.step_check = [step](const Vector& c, const Vector& x) { return check_step(*step, x, c); };
    return t;
  };
}

TrialMaker topk_trials(double corrupt) {
  const Eigen::Index n = 5;
  const double k = 2.0;
  return [=](Rng& rng) {
    Trial t;
    t.c = rng.normal_vector(n);
    t.decide = [k](const Vector& c) { return topk_forward(c, k); };
    auto step_at = [=](const Vector& x) -> std::shared_ptr<const DifferentiableStep> {
      std::shared_ptr<const DifferentiableStep> s = make_topk_step(n, k, topk_step_size(x));
      if (corrupt != 1.0) s = std::make_shared<ScaledParamStep>(s, corrupt);
      return s;
    };
    t.vjp = [=](const Vector& c, const Vector& x, const Vector& g) {
      FoldingOptions o;
      o.forward_tol = 1e-12;
      const FoldedLayer layer(
          step_at(x), [k](const Vector& cc, const Vector*) { return fixed_report(topk_forward(cc, k)); }, o);
      return layer.backward_vjp(c, x, g).grad_c;
    };
    t.pattern = [](const Vector&, const Vector& x) { return bound_pattern(x, 1e-12, 1.0, true); };
    t.step_check = [=](const Vector& c, const Vector& x) { return check_step(*step_at(x), x, c); };
    return t;
  };
}

TrialMaker admm_trials() {
  return [](Rng& rng) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(3));
    const Eigen::Index m = 1 + static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(n - 1)));
    // Exact forward: ADMM at unit penalty can need millions of iterations on
    // these curvatures, and the check concerns the backward pass.
    AdmmLayerOptions o;
    o.exact_forward = true;
    auto layer = std::make_shared<AdmmQpLayer>(random_standard_qp(rng, n, m), o);
    Trial t;
    t.c = layer->base().p;
    t.decide = [layer](const Vector& c) { return layer->primal(layer->layer().forward(c).x_star); };
    // The state is needed for the backward pass; re-solving keeps the
    // decision-level interface.
    t.vjp = [layer](const Vector& c, const Vector&, const Vector& g) {
      const Vector s = layer->layer().forward(c).x_star;
      return layer->layer().backward_vjp(c, s, layer->state_cotangent(g)).grad_c;
    };
    t.pattern = [](const Vector&, const Vector& x) { return bound_pattern(x, 1e-9); };
    t.step_check = [layer](const Vector& c, const Vector&) {
      const Vector s = layer->layer().forward(c).x_star;
      return check_step(layer->layer().step(), s, c);
    };
    return t;
  };
}

TrialMaker denoise_trials() {
  const Eigen::Index n = 8;
  auto layer = std::make_shared<DenoiseLayer>(0.5);
  return [=](Rng& rng) {
    const Matrix D0 = difference_operator(n) + 0.05 * rng.normal_matrix(n - 1, n);
    const Vector d = 3.0 * rng.normal_vector(n);
    auto unpack = [=](const Vector& c) -> Matrix { return Eigen::Map<const Matrix>(c.data(), n - 1, n); };
    Trial t;
    t.c = flatten_row_major(D0);
    t.decide = [=](const Vector& c) { return layer->forward(unpack(c), d).u; };
    t.vjp = [=](const Vector& c, const Vector&, const Vector& g) {
      const Matrix D = unpack(c);
      return flatten_row_major(layer->vjp(D, d, layer->forward(D, d), g));
    };
    t.pattern = [=](const Vector& c, const Vector&) {
      const Vector w = layer->forward(unpack(c), d).state.head(n - 1);
      std::vector<int> p;
      for (Eigen::Index i = 0; i < w.size(); ++i)
        p.push_back(std::abs(w(i)) >= layer->lambda() * (1.0 - 1e-9) ? (w(i) > 0 ? 1 : -1) : 0);
      return p;
    };
    t.step_check = [=](const Vector& c, const Vector&) {
      const Matrix D = unpack(c);
      const auto out = layer->forward(D, d);
      return check_step(layer->layer(D, d, out).step(), out.state, c);
    };
    return t;
  };
}

TrialMaker portfolio_trials(uint64_t seed) {
  const PortfolioData data = generate_portfolio_data(seed, 1);
  auto map = std::make_shared<PortfolioDecision>(data.V, data.gamma);
  const Matrix prices = data.split.train.targets;
  return [=](Rng& rng) {
    Trial t;
    t.c = prices.row(static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(prices.rows())))).transpose();
    t.decide = [map](const Vector& c) { return map->decide(c); };
    t.vjp = [map](const Vector& c, const Vector& x, const Vector& g) { return map->decide_vjp(c, x, g); };
    t.pattern = [map](const Vector& c, const Vector& x) {
      const PortfolioSolution s = solve_portfolio(map->V(), map->gamma(), c);
      // A slack budget has a trivially zero gradient; only binding points
      // exercise the SQP layer.
      if (!s.risk_binding) return std::vector<int>{};
      return bound_pattern(x, 1e-9);
    };
    t.step_check = [map](const Vector& c, const Vector&) { return check_step(map->step(), map->state(c), c); };
    return t;
  };
}

TrialMaker bilinear_trials(uint64_t seed) {
  const BilinearData data = generate_bilinear_data(seed);
  auto layer = std::make_shared<BilinearLayer>(data.Q);
  const Matrix costs = data.split.train.targets;
  return [=](Rng& rng) {
    Trial t;
    t.c = costs.row(static_cast<Eigen::Index>(rng.below(static_cast<uint64_t>(costs.rows())))).transpose();
    t.decide = [layer](const Vector& c) { return layer->decide(c); };
    t.vjp = [layer](const Vector& c, const Vector& z, const Vector& g) { return layer->decide_vjp(c, z, g); };
    t.pattern = [](const Vector&, const Vector& z) { return bound_pattern(z, 1e-9, 1.0, true); };
    t.step_check = [layer](const Vector& c, const Vector& z) { return check_step(layer->step(), z, c); };
    return t;
  };
}

TrialMaker trials_for(const std::string& name, uint64_t seed) {
  if (name == "identity") return identity_trials();
  if (name == "pgd-topk") return topk_trials(1.0);
  if (name == "corrupted") return topk_trials(1.1);
  if (name == "admm-qp") return admm_trials();
  if (name == "fdpg-denoise") return denoise_trials();
  if (name == "sqp-portfolio") return portfolio_trials(seed);
  if (name == "pgd-bilinear") return bilinear_trials(seed);
  throw Error(ErrorCode::InvalidArgument, "unknown layer: " + name);
}

// Locally smooth: same pattern and a small move for a few perturbations.
bool locally_smooth(const Trial& t, const Vector& x, const std::vector<int>& pat, Rng& rng) {
  for (int r = 0; r < 4; ++r) {
    Vector cp = t.c;
    for (Eigen::Index j = 0; j < cp.size(); ++j)
      cp(j) += (rng.uniform() < 0.5 ? -1e-3 : 1e-3) * (1.0 + std::abs(cp(j)));
    const Vector xp = t.decide(cp);
    if (t.pattern(cp, xp) != pat) return false;
    if ((xp - x).lpNorm<Eigen::Infinity>() > 0.05) return false;
  }
  return true;
}

}  // namespace

std::vector<std::string> rate_layer_names() { return {"pgd-topk", "admm-qp", "fdpg", "scalar"}; }

RateSetup make_rate_setup(const std::string& name, uint64_t seed) {
  if (name == "pgd-topk") return topk_rate(seed);
  if (name == "admm-qp") return admm_rate(seed);
  if (name == "fdpg") return fdpg_rate(seed);
  if (name == "scalar") return scalar_rate();
  throw Error(ErrorCode::InvalidArgument, "unknown rate layer: " + name);
}

std::vector<std::string> checkgrad_layer_names() {
  return {"identity", "pgd-topk", "admm-qp", "fdpg-denoise", "sqp-portfolio", "pgd-bilinear"};
}

bool is_checkgrad_layer(const std::string& name) {
  const auto names = checkgrad_layer_names();
  return name == "corrupted" || std::find(names.begin(), names.end(), name) != names.end();
}

Vector fd_vjp(const std::function<Vector(const Vector&)>& f, const Vector& c, const Vector& g, double h) {
  Vector out(c.size());
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    const double hj = h * (1.0 + std::abs(c(j)));
    Vector cp = c, cm = c;
    cp(j) += hj;
    cm(j) -= hj;
    out(j) = g.dot((f(cp) - f(cm)) / (cp(j) - cm(j)));
  }
  return out;
}

GradCheckResult check_layer_gradients(const std::string& name, int trials, uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "checkgrad: trials must be >= 1");
  const TrialMaker make = trials_for(name, seed);
  Rng rng(seed);
  GradCheckResult res;
  res.layer = name;
  const int max_draws = 50 * trials;
  for (int draw = 0; res.trials < trials; ++draw) {
    if (draw >= max_draws)
      throw Error(ErrorCode::NoConvergence, "checkgrad: too few non-degenerate points for " + name);
    const Trial t = make(rng);
    const Vector x = t.decide(t.c);
    const std::vector<int> pat = t.pattern(t.c, x);
    if (pat.empty() || !locally_smooth(t, x, pat, rng)) {
      ++res.rejected;
      continue;
    }
    const Vector g = rng.normal_vector(x.size());
    const Vector an = t.vjp(t.c, x, g);
    const Vector fd = fd_vjp(t.decide, t.c, g);
    for (Eigen::Index j = 0; j < an.size(); ++j)
      res.e2e_deviation = std::max(res.e2e_deviation, std::abs(an(j) - fd(j)) / (1.0 + 10.0 * std::abs(fd(j))));
    res.step_deviation = std::max(res.step_deviation, t.step_check(t.c, x).max_deviation());
    ++res.trials;
  }
  return res;
}

}  // namespace foldcore
