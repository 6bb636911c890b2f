#include "foldcore/solvers/fdpg.hpp"

#include "foldcore/prox_proj.hpp"

#include <cmath>
#include <vector>

namespace foldcore {

namespace {

double next_t(double t) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t)); }

struct Update {
  Vector w_next, y_next;
};

Update fdpg_update(const Matrix& D, const Vector& d, double lambda, double L, double beta, const Vector& w,
                   const Vector& y) {
  const Vector u = D.transpose() * w + d;
  const Vector Du = D * u;
  const Vector q = Du - L * w;
  Update out;
  out.y_next = w - Du / L + soft_threshold(q, L * lambda) / L;
  out.w_next = (1.0 + beta) * out.y_next - beta * y;
  return out;
}

// Exact dual solution on the active set read off the current iterate:
// saturated rows are pinned to ±λ, the rest solve (D u)_F = 0.
bool polish_dual(const Matrix& D, const Vector& d, double lambda, double L, Vector& w) {
  const Eigen::Index m = D.rows();
  const Vector u = D.transpose() * w + d;
  const Vector q = D * u - L * w;
  std::vector<Eigen::Index> free;
  Vector ws = Vector::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(q(i)) > L * lambda) ws(i) = q(i) > 0 ? lambda : -lambda;
    else free.push_back(i);
  }
  Vector cand = ws;
  if (!free.empty()) {
    const Eigen::Index k = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd DF(k, D.cols());
    for (Eigen::Index j = 0; j < k; ++j) DF.row(j) = D.row(free[static_cast<size_t>(j)]);
    const Eigen::VectorXd rhs = -DF * (d + D.transpose() * ws);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(DF * DF.transpose());
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().cwiseAbs().minCoeff() < 1e-12 * (1.0 + ldlt.vectorD().cwiseAbs().maxCoeff()))
      return false;
    const Eigen::VectorXd wf = ldlt.solve(rhs);
    for (Eigen::Index j = 0; j < k; ++j) cand(free[static_cast<size_t>(j)]) = wf(j);
  }
  if (!all_finite(cand)) return false;
  // Accept only if the candidate is an exact fixed point of the update.
  const Update up = fdpg_update(D, d, lambda, L, 0.0, cand, cand);
  const double res = (up.y_next - cand).lpNorm<Eigen::Infinity>();
  if (res > 1e-11 * (1.0 + cand.lpNorm<Eigen::Infinity>() + d.lpNorm<Eigen::Infinity>())) return false;
  w = cand;
  return true;
}

}  // namespace

double fdpg_lipschitz(const Matrix& D) {
  if (D.size() == 0) return 4.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(D * D.transpose()), Eigen::EigenvaluesOnly);
  return std::max(4.0, 1.01 * es.eigenvalues().maxCoeff());
}

FdpgResult fdpg_solve(const Matrix& D, const Vector& d, const FdpgConfig& cfg, const Vector* w0) {
  require_size(d.size(), D.cols(), "fdpg data");
  const Eigen::Index m = D.rows();
  FdpgResult r;
  r.w = w0 ? *w0 : Vector::Zero(m);
  require_size(r.w.size(), m, "fdpg start");
  r.y = r.w;
  double t = 1.0;
  for (int k = 0; k < cfg.max_iter; ++k) {
    const double tn = next_t(t);
    const double beta = (t - 1.0) / tn;
    Update up = fdpg_update(D, d, cfg.lambda, cfg.lipschitz, beta, r.w, r.y);
    if (!all_finite(up.w_next)) throw Error(ErrorCode::NonFinite, "fdpg iterate became non-finite");
    const double diff = std::max((up.w_next - r.w).lpNorm<Eigen::Infinity>(), (up.y_next - r.y).lpNorm<Eigen::Infinity>());
    // Gradient-based restart: momentum that opposes the last descent step.
    if (cfg.adaptive_restart && (r.w - up.y_next).dot(up.y_next - r.y) > 0.0) {
      t = 1.0;
      up.w_next = up.y_next;
    } else {
      t = tn;
    }
    r.w = std::move(up.w_next);
    r.y = std::move(up.y_next);
    r.iterations = k + 1;
    if (cfg.polish && diff < 1e-6 && (k % 20 == 0)) {
      Vector wp = r.y;
      if (polish_dual(D, d, cfg.lambda, cfg.lipschitz, wp)) {
        r.w = wp;
        r.y = wp;
        r.converged = true;
        r.polished = true;
        break;
      }
    }
    if (diff < cfg.tol) {
      r.converged = true;
      break;
    }
  }
  r.t = t;
  return r;
}

FdpgStep::FdpgStep(Eigen::Index m, Eigen::Index n, Vector d, double lambda, double lipschitz, double t)
    : m_(m), n_(n), d_(std::move(d)), lambda_(lambda), L_(lipschitz), t_(t) {
  require_size(d_.size(), n, "fdpg step data");
  if (lambda < 0.0) throw Error(ErrorCode::InvalidArgument, "fdpg: lambda must be >= 0");
  if (!(lipschitz > 0.0)) throw Error(ErrorCode::InvalidArgument, "fdpg: L must be positive");
  if (t < 1.0) throw Error(ErrorCode::InvalidArgument, "fdpg: momentum counter t must be >= 1");
  beta_ = (t - 1.0) / next_t(t);
}

Matrix FdpgStep::unpack(const Vector& c) const {
  require_size(c.size(), m_ * n_, "fdpg parameters");
  return Eigen::Map<const Matrix>(c.data(), m_, n_);
}

Vector FdpgStep::forward(const Vector& s, const Vector& c) const {
  require_size(s.size(), 2 * m_, "fdpg state");
  const Matrix D = unpack(c);
  const Update up = fdpg_update(D, d_, lambda_, L_, beta_, s.head(m_), s.tail(m_));
  Vector out(2 * m_);
  out << up.w_next, up.y_next;
  return out;
}

namespace {

class FdpgLinearization : public StepLinearization {
 public:
  FdpgLinearization(Matrix D, Vector w, Vector u, Eigen::Matrix<bool, Eigen::Dynamic, 1> mask, double L,
                    double beta)
      : D_(std::move(D)), w_(std::move(w)), u_(std::move(u)), mask_(std::move(mask)), L_(L), beta_(beta) {}

  Vector vjp_state(const Vector& v) const override {
    Vector s_bar;
    backprop(v, s_bar, nullptr);
    return s_bar;
  }
  Vector vjp_param(const Vector& v) const override {
    Vector s_bar;
    Matrix D_bar;
    backprop(v, s_bar, &D_bar);
    return Eigen::Map<const Vector>(D_bar.data(), D_bar.size());
  }

 private:
  void backprop(const Vector& v, Vector& s_bar, Matrix* D_bar) const {
    const Eigen::Index m = D_.rows();
    require_size(v.size(), 2 * m, "fdpg cotangent");
    const Vector wb_next = v.head(m), yb_next = v.tail(m);
    const Vector a = yb_next + (1.0 + beta_) * wb_next;
    const Vector q_bar = mask_.select(a / L_, Vector::Zero(m));
    const Vector r_bar = -a / L_ + q_bar;  // cotangent of D u
    const Vector u_bar = D_.transpose() * r_bar;
    s_bar.resize(2 * m);
    s_bar.head(m) = a - L_ * q_bar + D_ * u_bar;
    s_bar.tail(m) = -beta_ * wb_next;
    if (D_bar) *D_bar = r_bar * u_.transpose() + w_ * u_bar.transpose();
  }

  Matrix D_;
  Vector w_, u_;
  Eigen::Matrix<bool, Eigen::Dynamic, 1> mask_;
  double L_, beta_;
};

}  // namespace

std::unique_ptr<StepLinearization> FdpgStep::linearize(const Vector& s, const Vector& c) const {
  require_size(s.size(), 2 * m_, "fdpg state");
  const Matrix D = unpack(c);
  const Vector w = s.head(m_);
  const Vector u = D.transpose() * w + d_;
  const Vector q = D * u - L_ * w;
  Eigen::Matrix<bool, Eigen::Dynamic, 1> mask(m_);
  for (Eigen::Index i = 0; i < m_; ++i) mask(i) = std::abs(q(i)) > L_ * lambda_;
  return std::make_unique<FdpgLinearization>(D, w, u, mask, L_, beta_);
}

Vector fdpg_primal(const Matrix& D, const Vector& d, const Vector& state) {
  require_size(state.size(), 2 * D.rows(), "fdpg state");
  return D.transpose() * state.head(D.rows()) + d;
}

std::pair<Vector, Vector> fdpg_primal_vjp(const Matrix& D, const Vector& state, const Vector& u_bar) {
  const Eigen::Index m = D.rows();
  require_size(u_bar.size(), D.cols(), "fdpg primal cotangent");
  Vector s_bar = Vector::Zero(2 * m);
  s_bar.head(m) = D * u_bar;
  const Matrix D_bar = state.head(m) * u_bar.transpose();
  return {s_bar, Eigen::Map<const Vector>(D_bar.data(), D_bar.size())};
}

}  // namespace foldcore
