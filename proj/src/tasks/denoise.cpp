#include "foldcore/tasks/denoise.hpp"

namespace foldcore {

DenoiseLayer::DenoiseLayer(double lambda, double forward_tol, FoldingOptions folding)
    : lambda_(lambda), forward_tol_(forward_tol), folding_(folding) {
  if (lambda < 0.0) throw Error(ErrorCode::InvalidArgument, "denoise: lambda must be >= 0");
  folding_.forward_tol = forward_tol;
}

DenoiseLayer::Output DenoiseLayer::forward(const Matrix& D, const Vector& d) const {
  FdpgConfig cfg;
  cfg.lambda = lambda_;
  cfg.lipschitz = fdpg_lipschitz(D);
  cfg.tol = forward_tol_;
  const FdpgResult r = fdpg_solve(D, d, cfg);
  Output out;
  out.state.resize(2 * D.rows());
  out.state << r.w, r.y;
  out.t = r.t;
  out.lipschitz = cfg.lipschitz;
  out.iterations = r.iterations;
  if (!r.converged) {
    SolveReport rep;
    rep.x_star = out.state;
    rep.iterations = r.iterations;
    throw SolveError(ErrorCode::NoConvergence, "fdpg did not converge", rep);
  }
  out.u = fdpg_primal(D, d, out.state);
  return out;
}

FoldedLayer DenoiseLayer::layer(const Matrix& D, const Vector& d, const Output& out) const {
  auto step = std::make_shared<FdpgStep>(D.rows(), D.cols(), d, lambda_, out.lipschitz, out.t);
  const Vector s = out.state;
  return FoldedLayer(
      step,
      [s](const Vector&, const Vector*) {
        SolveReport r;
        r.x_star = s;
        r.converged = true;
        return r;
      },
      folding_);
}

Matrix DenoiseLayer::vjp(const Matrix& D, const Vector& d, const Output& out, const Vector& u_bar) const {
  auto [state_bar, direct] = fdpg_primal_vjp(D, out.state, u_bar);
  const FoldedLayer fl = layer(D, d, out);
  const Vector through = fl.backward_vjp(flatten_row_major(D), out.state, state_bar).grad_c;
  const Vector total = through + direct;
  return Eigen::Map<const Matrix>(total.data(), D.rows(), D.cols());
}

}  // namespace foldcore
