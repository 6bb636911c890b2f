#include "foldcore/tasks/topk.hpp"

#include "foldcore/solvers/objectives.hpp"

#include <cmath>

namespace foldcore {

Vector topk_forward(const Vector& c, double k) {
  const Eigen::Index n = c.size();
  if (!(k > 0.0 && k < static_cast<double>(n))) throw Error(ErrorCode::InvalidArgument, "top-k needs 0 < k < n");
  require_finite(c, "top-k scores");
  auto total = [&](double tau) { return (c.array() - 1.0 - tau).exp().min(1.0).sum(); };
  // total is nonincreasing in τ; bracket with total(lo) ≥ k ≥ total(hi).
  const double shift = std::log(static_cast<double>(n) / k);
  double lo = c.minCoeff() - 1.0 + shift, hi = c.maxCoeff() - 1.0 + shift;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) >= k ? lo : hi) = mid;
  }
  const double tau = 0.5 * (lo + hi);
  Vector x = (c.array() - 1.0 - tau).exp().min(1.0).matrix();
  // Spread the remaining sum error over the free coordinates.
  const Eigen::Index nfree = (x.array() < 1.0).count();
  if (nfree > 0) {
    const double err = (k - x.sum()) / static_cast<double>(nfree);
    for (Eigen::Index i = 0; i < n; ++i)
      if (x(i) < 1.0) x(i) += err;
  }
  return x;
}

double topk_step_size(const Vector& x_star) {
  double m = 1.0;
  for (Eigen::Index i = 0; i < x_star.size(); ++i)
    if (x_star(i) < 1.0) m = std::min(m, x_star(i));
  return std::max(m, 1e-8);
}

std::shared_ptr<PgdStep> make_topk_step(Eigen::Index n, double k, double alpha) {
  return std::make_shared<PgdStep>(std::make_shared<EntropicLinear>(n),
                                   std::make_shared<CappedSimplexProjector>(std::vector<CappedSimplexSpec>{{k, n}}),
                                   alpha);
}

FoldedLayer make_topk_layer(Eigen::Index n, double k, double alpha, FoldingOptions options) {
  auto step = make_topk_step(n, k, alpha);
  return FoldedLayer(
      step,
      [k](const Vector& c, const Vector*) {
        SolveReport r;
        r.x_star = topk_forward(c, k);
        r.converged = true;
        return r;
      },
      options);
}

FoldingOptions topk_training_folding() {
  FoldingOptions o;
  o.backward_max_iter = 500;
  return o;
}

TopkDecision::TopkDecision(Eigen::Index n, double k, FoldingOptions options) : n_(n), k_(k), options_(options) {}

FoldedLayer TopkDecision::layer_at(const Vector& x_star) const {
  return make_topk_layer(n_, k_, topk_step_size(x_star), options_);
}

Vector TopkDecision::decide_vjp(const Vector& c, const Vector& x, const Vector& g) const {
  const FoldedLayer layer = layer_at(x);
  try {
    return layer.backward_vjp(c, x, g).grad_c;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Breakdown && e.code() != ErrorCode::NoConvergence) throw;
    return layer.jacobian_dense(c, x).transpose() * g;
  }
}

}  // namespace foldcore
