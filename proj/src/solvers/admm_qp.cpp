#include "foldcore/solvers/admm_qp.hpp"

namespace foldcore {

AffineQpParametrization::AffineQpParametrization(QpStandard base, Matrix P, Matrix B)
    : base_(std::move(base)), P_(std::move(P)), B_(std::move(B)) {
  base_.validate();
  if (P_.rows() != base_.n() || B_.rows() != base_.m())
    throw Error(ErrorCode::ShapeMismatch, "affine qp parametrization: map shapes");
}

std::shared_ptr<AffineQpParametrization> AffineQpParametrization::linear_term(QpStandard base) {
  const Eigen::Index n = base.n(), m = base.m();
  base.p.setZero();
  return std::make_shared<AffineQpParametrization>(std::move(base), Matrix::Identity(n, n), Matrix::Zero(m, 0));
}

QpStandard AffineQpParametrization::build(const Vector& c) const {
  require_size(c.size(), param_dim(), "qp parameters");
  QpStandard qp = base_;
  qp.p += P_ * c.head(P_.cols());
  if (B_.cols() > 0) qp.b += B_ * c.tail(B_.cols());
  return qp;
}

Vector AffineQpParametrization::pullback(const Vector&, const QpStandardCotangent& bar) const {
  Vector out(param_dim());
  out.head(P_.cols()) = P_.transpose() * bar.p;
  if (B_.cols() > 0) out.tail(B_.cols()) = B_.transpose() * bar.b;
  return out;
}

Vector DenseQpParametrization::pack(const QpStandard& qp) {
  const Eigen::Index n = qp.n(), m = qp.m();
  Vector c(n * n + n + m * n + m);
  c.head(n * n) = Eigen::Map<const Vector>(qp.Q.data(), n * n);
  c.segment(n * n, n) = qp.p;
  c.segment(n * n + n, m * n) = Eigen::Map<const Vector>(qp.A.data(), m * n);
  c.tail(m) = qp.b;
  return c;
}

Vector DenseQpParametrization::pack(const QpStandardCotangent& bar) {
  return pack(QpStandard{bar.Q, bar.p, bar.A, bar.b});
}

QpStandard DenseQpParametrization::build(const Vector& c) const {
  require_size(c.size(), param_dim(), "dense qp parameters");
  QpStandard qp;
  qp.Q = Eigen::Map<const Matrix>(c.data(), n_, n_);
  qp.p = c.segment(n_ * n_, n_);
  qp.A = Eigen::Map<const Matrix>(c.data() + n_ * n_ + n_, m_, n_);
  qp.b = c.tail(m_);
  return qp;
}

Vector DenseQpParametrization::pullback(const Vector&, const QpStandardCotangent& bar) const { return pack(bar); }

QpStandardCotangent DenseQpParametrization::unpack_cotangent(const Vector& c_bar) const {
  const QpStandard q = build(c_bar);
  return {q.Q, q.p, q.A, q.b};
}

namespace {

Matrix kkt_matrix(const QpStandard& qp, double rho) {
  const Eigen::Index n = qp.n(), m = qp.m();
  Matrix M = Matrix::Zero(n + m, n + m);
  M.topLeftCorner(n, n) = qp.Q + rho * Matrix::Identity(n, n);
  if (m > 0) {
    M.topRightCorner(n, m) = qp.A.transpose();
    M.bottomLeftCorner(m, n) = qp.A;
  }
  return M;
}

LuFactorization factor_kkt(const QpStandard& qp, double rho) {
  try {
    return LuFactorization(kkt_matrix(qp, rho));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::SingularMatrix) throw Error(ErrorCode::SingularKkt, e.what(), e.estimate());
    throw;
  }
}

}  // namespace

AdmmKkt::AdmmKkt(const QpStandard& qp, double rho) : rho_(rho), lu_(factor_kkt(qp, rho)) {}

Vector AdmmKkt::solve(const QpStandard& qp, const Vector& z, const Vector& u) const {
  const Eigen::Index n = qp.n(), m = qp.m();
  Vector r(n + m);
  r.head(n) = -qp.p + rho_ * (z - u);
  r.tail(m) = qp.b;
  return lu_.solve(r);
}

AdmmQpStep::AdmmQpStep(std::shared_ptr<const QpParametrization> param, double rho)
    : param_(std::move(param)), rho_(rho) {
  if (!(rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "admm: rho must be positive");
}

Vector AdmmQpStep::forward(const Vector& s, const Vector& c) const {
  const Eigen::Index n = param_->n();
  require_size(s.size(), 3 * n, "admm state");
  const QpStandard qp = param_->build(c);
  const AdmmKkt kkt(qp, rho_);
  const Vector z = s.segment(n, n), u = s.tail(n);
  const Vector xn = kkt.solve(qp, z, u).head(n);
  const Vector y = xn + u;
  Vector out(3 * n);
  out << xn, y.cwiseMax(0.0), y.cwiseMin(0.0);
  return out;
}

AdmmQpLinearization::AdmmQpLinearization(const AdmmQpStep& step, const Vector& s, const Vector& c)
    : step_(step), c_(c), qp_(step.parametrization().build(c)), kkt_(qp_, step.rho()) {
  const Eigen::Index n = qp_.n();
  require_size(s.size(), 3 * n, "admm state");
  sol_ = kkt_.solve(qp_, s.segment(n, n), s.tail(n));
  const Vector y = sol_.head(n) + s.tail(n);
  pos_ = (y.array() > 0.0).cast<double>().matrix();
}

Vector AdmmQpLinearization::vjp_state(const Vector& v) const {
  Vector state_bar;
  backprop(v, state_bar, nullptr);
  return state_bar;
}

Vector AdmmQpLinearization::vjp_param(const Vector& v) const {
  Vector state_bar;
  QpStandardCotangent data_bar = QpStandardCotangent::zeros_like(qp_);
  backprop(v, state_bar, &data_bar);
  return step_.parametrization().pullback(c_, data_bar);
}

std::pair<Vector, Vector> AdmmQpLinearization::kkt_dual_vjp(const Vector& nu_bar) const {
  const Eigen::Index n = qp_.n(), m = qp_.m();
  require_size(nu_bar.size(), m, "admm dual cotangent");
  Vector state_bar = Vector::Zero(3 * n);
  QpStandardCotangent data_bar = QpStandardCotangent::zeros_like(qp_);
  Vector sol_bar = Vector::Zero(n + m);
  sol_bar.tail(m) = nu_bar;
  kkt_backprop(sol_bar, state_bar, &data_bar);
  return {state_bar, step_.parametrization().pullback(c_, data_bar)};
}

// With s = KKT⁻ᵀ[x̄; ν̄] = [a; β]: z̄ = ρa, ū = −ρa, p̄ = −a, b̄ = β,
// Q̄ = −a x⁺ᵀ, Ā = −β x⁺ᵀ − ν aᵀ.
void AdmmQpLinearization::kkt_backprop(const Vector& sol_bar, Vector& state_bar, QpStandardCotangent* data_bar) const {
  const Eigen::Index n = qp_.n(), m = qp_.m();
  const Vector s = kkt_.solve_transpose(sol_bar);
  const Vector a = s.head(n), beta = s.tail(m);
  const double rho = step_.rho();
  state_bar.segment(n, n) += rho * a;
  state_bar.tail(n) -= rho * a;
  if (data_bar) {
    const Vector xn = sol_.head(n), nu = sol_.tail(m);
    data_bar->p -= a;
    data_bar->b += beta;
    data_bar->Q -= a * xn.transpose();
    if (m > 0) data_bar->A -= beta * xn.transpose() + nu * a.transpose();
  }
}

void AdmmQpLinearization::backprop(const Vector& v, Vector& state_bar, QpStandardCotangent* data_bar) const {
  const Eigen::Index n = qp_.n(), m = qp_.m();
  require_size(v.size(), 3 * n, "admm cotangent");
  const Vector xb = v.head(n), zb = v.segment(n, n), ub = v.tail(n);
  // z⁺ = (y)₊ and u⁺ = y − z⁺ with y = x⁺ + u.
  const Vector yb = pos_.cwiseProduct(zb) + (Vector::Ones(n) - pos_).cwiseProduct(ub);
  state_bar = Vector::Zero(3 * n);
  state_bar.tail(n) += yb;
  Vector sol_bar = Vector::Zero(n + m);
  sol_bar.head(n) = xb + yb;
  kkt_backprop(sol_bar, state_bar, data_bar);
}

std::unique_ptr<StepLinearization> AdmmQpStep::linearize(const Vector& s, const Vector& c) const {
  return linearize_admm(s, c);
}

std::unique_ptr<AdmmQpLinearization> AdmmQpStep::linearize_admm(const Vector& s, const Vector& c) const {
  return std::make_unique<AdmmQpLinearization>(*this, s, c);
}

Vector AdmmQpStep::kkt_dual(const Vector& s, const Vector& c) const { return linearize_admm(s, c)->kkt_dual(); }

std::pair<Vector, Vector> AdmmQpStep::kkt_dual_vjp(const Vector& s, const Vector& c, const Vector& nu_bar) const {
  return linearize_admm(s, c)->kkt_dual_vjp(nu_bar);
}

AdmmResult admm_qp_solve(const QpStandard& qp, double rho, double tol, int max_iter, const Vector* state0) {
  qp.validate();
  const Eigen::Index n = qp.n();
  const AdmmKkt kkt(qp, rho);
  AdmmResult r;
  r.state = state0 ? *state0 : Vector::Zero(3 * n);
  require_size(r.state.size(), 3 * n, "admm start");
  Vector sol;
  for (int k = 0; k < max_iter; ++k) {
    sol = kkt.solve(qp, r.state.segment(n, n), r.state.tail(n));
    const Vector xn = sol.head(n);
    const Vector y = xn + r.state.tail(n);
    Vector next(3 * n);
    next << xn, y.cwiseMax(0.0), y.cwiseMin(0.0);
    if (!all_finite(next)) throw Error(ErrorCode::NonFinite, "admm iterate became non-finite");
    const double diff = (next - r.state).lpNorm<Eigen::Infinity>();
    r.state = std::move(next);
    r.iterations = k + 1;
    if (diff < tol) {
      r.converged = true;
      break;
    }
  }
  r.nu = kkt.solve(qp, r.state.segment(n, n), r.state.tail(n)).tail(qp.m());
  return r;
}

Vector admm_fixed_point(const QpStandard& qp, const Vector& x, double rho) {
  const Eigen::Index n = qp.n();
  require_size(x.size(), n, "admm fixed point primal");
  Vector xc = x;
  const double tol = 1e-12 * (1.0 + x.lpNorm<Eigen::Infinity>());
  for (Eigen::Index i = 0; i < n; ++i)
    if (xc(i) <= tol) xc(i) = 0.0;
  const StandardMultipliers mult = standard_multipliers(qp, xc, 0.0);
  Vector s(3 * n);
  s << xc, xc, -mult.zeta.cwiseMax(0.0) / rho;
  return s;
}

}  // namespace foldcore
