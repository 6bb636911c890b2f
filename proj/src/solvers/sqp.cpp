#include "foldcore/solvers/sqp.hpp"

#include <cmath>
#include <sstream>

namespace foldcore {

void QuadraticProblem::validate() const {
  const Eigen::Index nn = n();
  if (F.cols() != nn || f0.size() != nn || C.rows() != nn)
    throw Error(ErrorCode::ShapeMismatch, "quadratic problem: objective shapes");
  for (const auto& g : ineq) {
    if (g.a.size() != nn) throw Error(ErrorCode::ShapeMismatch, "quadratic problem: constraint gradient shape");
    if (g.G.size() > 0 && (g.G.rows() != nn || g.G.cols() != nn))
      throw Error(ErrorCode::ShapeMismatch, "quadratic problem: constraint curvature shape");
  }
  if (E.rows() != e.size() || (E.rows() > 0 && E.cols() != nn))
    throw Error(ErrorCode::ShapeMismatch, "quadratic problem: equality shapes");
}

double QuadraticProblem::objective(const Vector& x, const Vector& c) const {
  return 0.5 * x.dot(F * x) + (f0 + C * c).dot(x);
}

Vector QuadraticProblem::objective_gradient(const Vector& x, const Vector& c) const { return F * x + f0 + C * c; }

Vector QuadraticProblem::ineq_values(const Vector& x) const {
  Vector v(m_in());
  for (Eigen::Index i = 0; i < m_in(); ++i) {
    const auto& g = ineq[static_cast<size_t>(i)];
    v(i) = g.a.dot(x) + g.b + (g.G.size() ? 0.5 * x.dot(g.G * x) : 0.0);
  }
  return v;
}

Matrix QuadraticProblem::ineq_jacobian(const Vector& x) const {
  Matrix J(m_in(), n());
  for (Eigen::Index i = 0; i < m_in(); ++i) {
    const auto& g = ineq[static_cast<size_t>(i)];
    J.row(i) = (g.G.size() ? Vector(g.G * x + g.a) : g.a).transpose();
  }
  return J;
}

Matrix QuadraticProblem::lagrangian_hessian(const Vector& mu) const {
  Matrix H = F;
  for (Eigen::Index i = 0; i < m_in(); ++i) {
    const auto& g = ineq[static_cast<size_t>(i)];
    if (g.G.size()) H += mu(i) * g.G;
  }
  return H;
}

double QuadraticProblem::infeasibility(const Vector& x) const {
  double r = 0.0;
  if (m_in() > 0) r = std::max(r, ineq_values(x).maxCoeff());
  if (m_eq() > 0) r = std::max(r, eq_values(x).lpNorm<Eigen::Infinity>());
  return r;
}

double QuadraticProblem::kkt_residual(const Vector& x, const Vector& mu, const Vector& nu, const Vector& c) const {
  Vector st = objective_gradient(x, c);
  if (m_in() > 0) st += ineq_jacobian(x).transpose() * mu;
  if (m_eq() > 0) st += E.transpose() * nu;
  double r = std::max(st.lpNorm<Eigen::Infinity>(), infeasibility(x));
  if (m_in() > 0) {
    const Vector g = ineq_values(x);
    r = std::max(r, (-mu).cwiseMax(0.0).maxCoeff());
    r = std::max(r, g.cwiseProduct(mu).cwiseAbs().maxCoeff());
  }
  return r;
}

SqpStep::SqpStep(QuadraticProblem problem, SqpConfig config) : problem_(std::move(problem)), config_(config) {
  problem_.validate();
  if (!(config_.alpha > 0.0 && config_.alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "sqp: alpha must be in (0, 1]");
}

QpGeneral SqpStep::subproblem(const Vector& s, const Vector& c) const {
  require_size(s.size(), state_dim(), "sqp state");
  require_size(c.size(), param_dim(), "sqp parameters");
  const Eigen::Index n = problem_.n(), mi = problem_.m_in();
  const Vector x = s.head(n), mu = s.segment(n, mi);
  QpGeneral qp;
  qp.Q = 2.0 * problem_.lagrangian_hessian(mu);
  qp.p = problem_.objective_gradient(x, c);
  qp.A = problem_.E;
  qp.b = -problem_.eq_values(x);
  qp.G = problem_.ineq_jacobian(x);
  qp.h = -problem_.ineq_values(x);
  if (!all_finite(qp.Q) || !all_finite(qp.p)) throw Error(ErrorCode::NonFiniteGradient, "sqp subproblem data not finite");
  return qp;
}

namespace {

Vector dual_step(const Vector& lam, const Vector& mu_new, const SqpConfig& cfg) {
  if (cfg.dual_update == DualUpdate::Scaled) return cfg.alpha * (mu_new - lam);
  return lam + cfg.alpha * (mu_new - lam);
}

QpSolution solve_subproblem(const QpGeneral& qp) {
  try {
    return solve_qp_active_set(qp);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument)
      throw Error(ErrorCode::SingularKkt, std::string("sqp subproblem curvature not positive definite: ") + e.what());
    throw;
  }
}

}  // namespace

Vector SqpStep::forward(const Vector& s, const Vector& c) const {
  const Eigen::Index n = problem_.n(), mi = problem_.m_in(), me = problem_.m_eq();
  const QpGeneral qp = subproblem(s, c);
  const QpSolution sol = solve_subproblem(qp);
  Vector mu_new(mi + me);
  mu_new << sol.ineq_multipliers, sol.eq_multipliers;
  Vector out(state_dim());
  out.head(n) = s.head(n) + config_.alpha * sol.x;
  out.tail(mi + me) = dual_step(s.tail(mi + me), mu_new, config_);
  return out;
}

Vector SqpStep::fixed_point_state(const Vector& x, const Vector& mu, const Vector& nu) const {
  require_size(x.size(), problem_.n(), "sqp primal");
  require_size(mu.size(), problem_.m_in(), "sqp inequality multipliers");
  require_size(nu.size(), problem_.m_eq(), "sqp equality multipliers");
  const double scale = config_.dual_update == DualUpdate::Scaled ? config_.alpha / (1.0 + config_.alpha) : 1.0;
  Vector s(state_dim());
  s << x, scale * mu, scale * nu;
  return s;
}

Vector SqpStep::multipliers(const Vector& s) const {
  require_size(s.size(), state_dim(), "sqp state");
  const double scale = config_.dual_update == DualUpdate::Scaled ? config_.alpha / (1.0 + config_.alpha) : 1.0;
  return s.tail(problem_.m_in() + problem_.m_eq()) / scale;
}

namespace {

// The subproblem solution is read from a folded ADMM layer on the standard
// form of the subproblem, lifted from the active-set solution.
class SqpLinearization : public StepLinearization {
 public:
  SqpLinearization(const SqpStep& step, const Vector& s, const Vector& c)
      : step_(step), c_(c), sub_(step.subproblem(s, c)), conv_(qp_general_to_standard(sub_)) {
    const QuadraticProblem& pr = step.problem();
    n_ = pr.n();
    mi_ = pr.m_in();
    me_ = pr.m_eq();
    x_ = s.head(n_);
    const QpSolution sol = solve_subproblem(sub_);
    const QpStandard& std_qp = conv_.standard;
    N_ = std_qp.n();
    param_ = std::make_shared<DenseQpParametrization>(N_, std_qp.m());
    inner_ = std::make_shared<AdmmQpStep>(param_, step.config().admm_rho);
    c_inner_ = DenseQpParametrization::pack(std_qp);
    state_inner_ = admm_fixed_point(std_qp, conv_.lift(sol.x, sub_, step.config().split_offset), inner_->rho());
    FoldingOptions opts;
    opts.method = BackwardMethod::Krylov;
    opts.backward_tol = step.config().inner_backward_tol;
    opts.forward_tol = 1e-9;
    const Vector fp = state_inner_;
    layer_ = std::make_unique<FoldedLayer>(
        inner_,
        [fp](const Vector&, const Vector*) {
          SolveReport r;
          r.x_star = fp;
          r.converged = true;
          return r;
        },
        opts);
    layer_->check_fixed_point(c_inner_, state_inner_);
    inner_lin_ = inner_->linearize_admm(state_inner_, c_inner_);
  }

  Vector vjp_state(const Vector& v) const override {
    Vector sb, cb;
    backprop(v, sb, cb);
    return sb;
  }
  Vector vjp_param(const Vector& v) const override {
    Vector sb, cb;
    backprop(v, sb, cb);
    return cb;
  }

 private:
  void backprop(const Vector& v, Vector& state_bar, Vector& c_bar) const {
    const SqpConfig& cfg = step_.config();
    const QuadraticProblem& pr = step_.problem();
    require_size(v.size(), n_ + mi_ + me_, "sqp cotangent");
    const Vector xb = v.head(n_), lb = v.tail(mi_ + me_);
    state_bar = Vector::Zero(n_ + mi_ + me_);
    state_bar.head(n_) = xb;
    state_bar.tail(mi_ + me_) = cfg.dual_update == DualUpdate::Scaled ? Vector(-cfg.alpha * lb)
                                                                      : Vector((1.0 - cfg.alpha) * lb);
    const Vector d_bar = cfg.alpha * xb;
    const Vector mu_new_bar = cfg.alpha * lb;  // [μ̄ (inequalities); ν̄ (equalities)]

    // Readouts of the inner fixed point: d from the z block, multipliers from
    // the KKT dual (rows ordered equalities first, then inequalities).
    Vector g_inner = Vector::Zero(3 * N_);
    g_inner.segment(N_, N_) = conv_.recover_vjp(d_bar);
    Vector nu_std_bar(me_ + mi_);
    nu_std_bar << mu_new_bar.tail(me_), mu_new_bar.head(mi_);
    auto [sb_nu, cb_nu] = inner_lin_->kkt_dual_vjp(nu_std_bar);
    g_inner += sb_nu;
    const BackwardReport br = layer_->backward_vjp(*inner_lin_, g_inner);
    const Vector c_inner_bar = br.grad_c + cb_nu;
    const QpGeneralCotangent gb = conv_.pullback(param_->unpack_cotangent(c_inner_bar));

    // Subproblem data as functions of (x, μ, c).
    Vector x_bar = pr.F.transpose() * gb.p;
    c_bar = pr.C.transpose() * gb.p;
    if (me_ > 0) x_bar -= pr.E.transpose() * gb.b;
    for (Eigen::Index i = 0; i < mi_; ++i) {
      const auto& g = pr.ineq[static_cast<size_t>(i)];
      const Vector grad_i = g.G.size() ? Vector(g.G * x_ + g.a) : g.a;
      x_bar -= gb.h(i) * grad_i;
      if (g.G.size()) {
        x_bar += g.G.transpose() * gb.G.row(i).transpose();
        state_bar(n_ + i) += 2.0 * (gb.Q.cwiseProduct(g.G)).sum();
      }
    }
    state_bar.head(n_) += x_bar;
  }

  const SqpStep& step_;
  Vector c_;
  QpGeneral sub_;
  StandardConversion conv_;
  Eigen::Index n_ = 0, mi_ = 0, me_ = 0, N_ = 0;
  Vector x_;
  std::shared_ptr<DenseQpParametrization> param_;
  std::shared_ptr<AdmmQpStep> inner_;
  Vector c_inner_, state_inner_;
  std::unique_ptr<FoldedLayer> layer_;
  std::unique_ptr<AdmmQpLinearization> inner_lin_;
};

}  // namespace

std::unique_ptr<StepLinearization> SqpStep::linearize(const Vector& s, const Vector& c) const {
  return std::make_unique<SqpLinearization>(*this, s, c);
}

SolveReport sqp_solve(const SqpStep& step, const Vector& c, const Vector& s0, double tol, int max_iter) {
  return solve(step, c, s0, tol, max_iter);
}

}  // namespace foldcore
