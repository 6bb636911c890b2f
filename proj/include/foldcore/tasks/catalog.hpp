#pragma once

#include "foldcore/folding.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace foldcore {

// Small layers at fixed points with 0.3 ≤ ρ(Φ) ≤ 0.95, used by the rate
// diagnostics.
struct RateSetup {
  std::string name;
  FoldedLayer layer;
  Vector c;
};

// pgd-topk, admm-qp, fdpg, scalar
std::vector<std::string> rate_layer_names();
RateSetup make_rate_setup(const std::string& name, uint64_t seed = 0);

struct GradCheckResult {
  std::string layer;
  int trials = 0;
  int rejected = 0;  // sampled points thrown away as near a kink
  // Max |entry| difference of the assembled step Jacobians from central
  // differences.
  double step_deviation = 0.0;
  // Max over parameters of |an − fd| / (1 + 10|fd|) for gᵀx*(c); below 1e-4
  // exactly when |an − fd| < 1e-4 + 1e-3|fd|.
  double e2e_deviation = 0.0;
  double max_deviation() const { return std::max(step_deviation, e2e_deviation); }
  bool passed(double threshold = 1e-4) const { return max_deviation() < threshold; }
};

// identity, pgd-topk, admm-qp, fdpg-denoise, sqp-portfolio, pgd-bilinear
std::vector<std::string> checkgrad_layer_names();

// Same names plus "corrupted", a top-k layer whose parameter VJP is scaled
// by 1.1 (negative control).
bool is_checkgrad_layer(const std::string& name);

// Draws `trials` parameter points where the layer is locally smooth (the
// active pattern of the decision is unchanged and the decision moves little
// under perturbations of relative size 1e-3) and compares step Jacobians and
// end-to-end VJPs against central differences.
GradCheckResult check_layer_gradients(const std::string& name, int trials, uint64_t seed);

// gᵀ ∂f/∂c by central differences of the vector map f, dividing by the
// realized step.
Vector fd_vjp(const std::function<Vector(const Vector&)>& f, const Vector& c, const Vector& g, double h = 1e-6);

}  // namespace foldcore
