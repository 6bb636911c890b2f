#include "foldcore/tasks/bilinear.hpp"

#include "foldcore/linalg.hpp"
#include "foldcore/rng.hpp"
#include "foldcore/solvers/solve.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace foldcore {

BilinearObjective::BilinearObjective(Matrix Q, double mu) : Q_(std::move(Q)), n_(Q_.rows()), mu_(mu) {
  if (Q_.cols() != n_) throw Error(ErrorCode::ShapeMismatch, "bilinear: Q must be square");
  if (mu < 0.0) throw Error(ErrorCode::InvalidArgument, "bilinear: mu must be >= 0");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(Q_)};
  sigma_max_ = n_ > 0 ? svd.singularValues()(0) : 0.0;
}

double BilinearObjective::value(const Vector& z, const Vector& c) const {
  const auto x = z.head(n_), y = z.tail(n_);
  return -c.dot(z) - x.dot(Q_ * y) + 0.5 * mu_ * z.squaredNorm();
}

Vector BilinearObjective::gradient(const Vector& z, const Vector& c) const {
  Vector g = mu_ * z - c;
  g.head(n_) -= Q_ * z.tail(n_);
  g.tail(n_) -= Q_.transpose() * z.head(n_);
  return g;
}

Vector BilinearObjective::hessian_vjp(const Vector&, const Vector&, const Vector& w) const {
  Vector h = mu_ * w;
  h.head(n_) -= Q_ * w.tail(n_);
  h.tail(n_) -= Q_.transpose() * w.head(n_);
  return h;
}

Vector BilinearObjective::mixed_vjp(const Vector&, const Vector&, const Vector& w) const { return -w; }

namespace {

FoldingOptions bilinear_folding(const BilinearConfig& cfg) {
  FoldingOptions f = cfg.folding;
  f.forward_tol = cfg.forward_tol;
  return f;
}

}  // namespace

BilinearLayer::BilinearLayer(Matrix Q, BilinearConfig cfg)
    : n_(Q.rows()),
      cfg_(cfg),
      f_(std::make_shared<BilinearObjective>(std::move(Q), cfg.mu)),
      step_(std::make_shared<PgdStep>(
          f_,
          std::make_shared<CappedSimplexProjector>(
              std::vector<CappedSimplexSpec>{{cfg.x_sum, n_}, {cfg.y_sum, n_}}),
          1.0 / f_->lipschitz())),
      layer_(step_,
             [this](const Vector& c, const Vector*) {
               SolveReport best;
               double best_val = std::numeric_limits<double>::infinity();
               for (const Vector& z0 : starting_points()) {
                 const Vector z = local_solve(c, z0);
                 const double v = f_->value(z, c);
                 // Ties go to the earlier start so the choice is reproducible.
                 if (v < best_val - 1e-12) {
                   best_val = v;
                   best.x_star = z;
                 }
               }
               best.converged = true;
               return best;
             },
             bilinear_folding(cfg)) {
  if (cfg.starts < 1) throw Error(ErrorCode::InvalidArgument, "bilinear: need at least one start");
}

std::vector<Vector> BilinearLayer::starting_points() const {
  std::vector<Vector> pts;
  Vector z0(2 * n_);
  z0 << Vector::Constant(n_, cfg_.x_sum / n_), Vector::Constant(n_, cfg_.y_sum / n_);
  pts.push_back(z0);
  Rng rng(0x5eed);
  for (int s = 1; s < cfg_.starts; ++s) pts.push_back(step_->projector().project(rng.uniform_vector(2 * n_, -1.0, 2.0)));
  return pts;
}

bool BilinearLayer::snap_to_face(const Vector& c, Vector& z) const {
  const Eigen::Index N = 2 * n_;
  const double eps = 1e-7;
  std::vector<Eigen::Index> fr;
  Vector fixed = Vector::Zero(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    if (z(i) <= eps) fixed(i) = 0.0;
    else if (z(i) >= 1.0 - eps) fixed(i) = 1.0;
    else { fr.push_back(i); fixed(i) = std::nan(""); }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(fr.size());
  // Unknowns: free coordinates and one multiplier per block.
  Matrix K = Matrix::Zero(k + 2, k + 2);
  Vector r = Vector::Zero(k + 2);
  Vector zf = z;
  for (Eigen::Index i = 0; i < N; ++i)
    if (!std::isnan(fixed(i))) zf(i) = fixed(i);
  Vector zfixed = zf;
  for (Eigen::Index i : fr) zfixed(i) = 0.0;
  // ∇f(z) = H z − c, with H applied column by column.
  const Vector base = f_->gradient(zfixed, c);
  double sums[2] = {cfg_.x_sum, cfg_.y_sum};
  for (Eigen::Index i = 0; i < N; ++i)
    if (!std::isnan(fixed(i))) sums[i < n_ ? 0 : 1] -= fixed(i);
  for (Eigen::Index a = 0; a < k; ++a) {
    const Vector col = f_->hessian_vjp(z, c, Vector::Unit(N, fr[a]));
    for (Eigen::Index b = 0; b < k; ++b) K(b, a) = col(fr[b]);
    const Eigen::Index blk = fr[a] < n_ ? 0 : 1;
    K(a, k + blk) = 1.0;
    K(k + blk, a) = 1.0;
    r(a) = -base(fr[a]);
  }
  r(k) = sums[0];
  r(k + 1) = sums[1];
  // A block without free coordinates leaves its multiplier undetermined.
  for (int blk = 0; blk < 2; ++blk)
    if (K.row(k + blk).cwiseAbs().sum() == 0.0) {
      if (std::abs(sums[blk]) > 1e-9) return false;
      K(k + blk, k + blk) = 1.0;
    }
  Vector sol;
  try {
    sol = lu_solve(K, r);
  } catch (const Error&) {
    return false;
  }
  Vector cand = zf;
  for (Eigen::Index a = 0; a < k; ++a) cand(fr[a]) = sol(a);
  for (Eigen::Index a = 0; a < k; ++a)
    if (!(cand(fr[a]) > 0.0 && cand(fr[a]) < 1.0)) return false;
  if (fixed_point_residual(*step_, cand, c) > 1e-12) return false;
  z = cand;
  return true;
}

Vector BilinearLayer::local_solve(const Vector& c, const Vector& z0) const {
  Vector z = z0;
  for (double tol : {1e-6, 1e-9, 1e-12}) {
    try {
      z = solve(*step_, c, z, tol, 200000).x_star;
    } catch (const SolveError& e) {
      if (e.code() != ErrorCode::NoConvergence) throw;
      z = e.report().x_star;
    }
    Vector snapped = z;
    if (snap_to_face(c, snapped)) return snapped;
  }
  return z;
}

DecisionObjective BilinearLayer::objective() const {
  DecisionObjective f;
  auto obj = f_;
  f.value = [obj](const Vector& z, const Vector& c) { return obj->value(z, c); };
  f.grad_x = [obj](const Vector& z, const Vector& c) { return obj->gradient(z, c); };
  return f;
}

}  // namespace foldcore
