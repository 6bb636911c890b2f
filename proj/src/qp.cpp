#include "foldcore/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace foldcore {

namespace {

void check_block(const Matrix& M, const Vector& v, Eigen::Index n, const char* what) {
  if (M.rows() != v.size() || (M.rows() > 0 && M.cols() != n))
    throw Error(ErrorCode::ShapeMismatch, std::string("qp: inconsistent ") + what + " block");
}

}  // namespace

void QpGeneral::validate() const {
  if (Q.rows() != Q.cols() || p.size() != Q.rows()) throw Error(ErrorCode::ShapeMismatch, "qp: Q/p shapes");
  check_block(A, b, n(), "equality");
  check_block(G, h, n(), "inequality");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff()))
    throw Error(ErrorCode::InvalidArgument, "qp: Q not symmetric");
}

void QpStandard::validate() const {
  if (Q.rows() != Q.cols() || p.size() != Q.rows()) throw Error(ErrorCode::ShapeMismatch, "qp: Q/p shapes");
  check_block(A, b, n(), "equality");
}

QpStandardCotangent QpStandardCotangent::zeros_like(const QpStandard& qp) {
  return {Matrix::Zero(qp.Q.rows(), qp.Q.cols()), Vector::Zero(qp.p.size()),
          Matrix::Zero(qp.A.rows(), qp.A.cols()), Vector::Zero(qp.b.size())};
}

QpGeneralCotangent QpGeneralCotangent::zeros_like(const QpGeneral& qp) {
  return {Matrix::Zero(qp.Q.rows(), qp.Q.cols()), Vector::Zero(qp.p.size()),
          Matrix::Zero(qp.A.rows(), qp.A.cols()), Vector::Zero(qp.b.size()),
          Matrix::Zero(qp.G.rows(), qp.G.cols()), Vector::Zero(qp.h.size())};
}

StandardConversion qp_general_to_standard(const QpGeneral& gp) {
  gp.validate();
  const Eigen::Index n = gp.n(), me = gp.A.rows(), mi = gp.G.rows();
  const Eigen::Index N = 2 * n + mi;
  StandardConversion out;
  out.n = n;
  out.m_in = mi;
  QpStandard& s = out.standard;
  s.Q = Matrix::Zero(N, N);
  s.Q.block(0, 0, n, n) = gp.Q;
  s.Q.block(0, n, n, n) = -gp.Q;
  s.Q.block(n, 0, n, n) = -gp.Q;
  s.Q.block(n, n, n, n) = gp.Q;
  s.p = Vector::Zero(N);
  s.p.head(n) = gp.p;
  s.p.segment(n, n) = -gp.p;
  s.A = Matrix::Zero(me + mi, N);
  if (me > 0) {
    s.A.block(0, 0, me, n) = gp.A;
    s.A.block(0, n, me, n) = -gp.A;
  }
  if (mi > 0) {
    s.A.block(me, 0, mi, n) = gp.G;
    s.A.block(me, n, mi, n) = -gp.G;
    s.A.block(me, 2 * n, mi, mi) = Matrix::Identity(mi, mi);
  }
  s.b = Vector(me + mi);
  s.b << gp.b, gp.h;
  return out;
}

Vector StandardConversion::recover(const Vector& z) const {
  require_size(z.size(), standard.n(), "standard-form point");
  return z.head(n) - z.segment(n, n);
}

Vector StandardConversion::recover_vjp(const Vector& x_bar) const {
  require_size(x_bar.size(), n, "recovered cotangent");
  Vector z_bar = Vector::Zero(standard.n());
  z_bar.head(n) = x_bar;
  z_bar.segment(n, n) = -x_bar;
  return z_bar;
}

QpGeneralCotangent StandardConversion::pullback(const QpStandardCotangent& bar) const {
  const Eigen::Index me = standard.m() - m_in;
  QpGeneralCotangent g;
  g.Q = bar.Q.block(0, 0, n, n) - bar.Q.block(0, n, n, n) - bar.Q.block(n, 0, n, n) + bar.Q.block(n, n, n, n);
  g.p = bar.p.head(n) - bar.p.segment(n, n);
  g.A = bar.A.block(0, 0, me, n) - bar.A.block(0, n, me, n);
  g.b = bar.b.head(me);
  g.G = bar.A.block(me, 0, m_in, n) - bar.A.block(me, n, m_in, n);
  g.h = bar.b.tail(m_in);
  return g;
}

Vector StandardConversion::lift(const Vector& x, const QpGeneral& gp, double split_offset) const {
  require_size(x.size(), n, "general-form point");
  Vector z(standard.n());
  z.head(n) = x.cwiseMax(0.0).array() + split_offset;
  z.segment(n, n) = (-x).cwiseMax(0.0).array() + split_offset;
  if (m_in > 0) z.tail(m_in) = (gp.h - gp.G * x).cwiseMax(0.0);
  return z;
}

QpGeneral standard_as_general(const QpStandard& qp) {
  qp.validate();
  const Eigen::Index n = qp.n();
  return QpGeneral{qp.Q, qp.p, qp.A, qp.b, -Matrix::Identity(n, n), Vector::Zero(n)};
}

namespace {

// Active constraint i is written as n_iᵀx ≥ d_i (equalities hold with
// equality). Inequalities Gx ≤ h become −G_i x ≥ −h_i.
struct ActiveSetWork {
  Eigen::LLT<Eigen::MatrixXd> chol;
  Eigen::MatrixXd normals;  // columns n_i, equalities first
  Eigen::VectorXd rhs;      // d_i
  Eigen::Index n_eq = 0;

  // L⁻¹ v
  Eigen::VectorXd half(const Eigen::VectorXd& v) const { return chol.matrixL().solve(v); }
  // L⁻ᵀ v
  Eigen::VectorXd half_t(const Eigen::VectorXd& v) const { return chol.matrixU().solve(v); }
};

struct Directions {
  Eigen::VectorXd z;  // primal step direction
  Eigen::VectorXd r;  // dual step direction over the active set
};

Directions step_directions(const ActiveSetWork& w, const std::vector<Eigen::Index>& active, Eigen::Index np) {
  const Eigen::VectorXd q = w.half(w.normals.col(np));
  Directions d;
  if (active.empty()) {
    d.r = Eigen::VectorXd(0);
    d.z = w.half_t(q);
    return d;
  }
  Eigen::MatrixXd B(q.size(), static_cast<Eigen::Index>(active.size()));
  for (size_t j = 0; j < active.size(); ++j) B.col(static_cast<Eigen::Index>(j)) = w.half(w.normals.col(active[j]));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
  const Eigen::Index k = B.cols();
  const Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Eigen::VectorXd qtq = (qr.householderQ().transpose() * q).head(k);
  d.r = R.triangularView<Eigen::Upper>().solve(qtq);
  d.z = w.half_t(q - B * d.r);
  return d;
}

}  // namespace

QpSolution solve_qp_active_set(const QpGeneral& qp) {
  qp.validate();
  const Eigen::Index n = qp.n(), me = qp.A.rows(), mi = qp.G.rows();
  ActiveSetWork w;
  w.chol.compute(Eigen::MatrixXd(qp.Q));
  if (w.chol.info() != Eigen::Success) throw Error(ErrorCode::InvalidArgument, "active-set QP needs Q positive definite");
  w.n_eq = me;
  w.normals.resize(n, me + mi);
  w.rhs.resize(me + mi);
  for (Eigen::Index i = 0; i < me; ++i) {
    w.normals.col(i) = qp.A.row(i).transpose();
    w.rhs(i) = qp.b(i);
  }
  for (Eigen::Index i = 0; i < mi; ++i) {
    w.normals.col(me + i) = -qp.G.row(i).transpose();
    w.rhs(me + i) = -qp.h(i);
  }

  const double scale = 1.0 + qp.Q.cwiseAbs().maxCoeff() + qp.p.cwiseAbs().maxCoeff();
  Eigen::VectorXd x = -w.half_t(w.half(qp.p));
  std::vector<Eigen::Index> active;
  std::vector<double> u;
  auto slack = [&](Eigen::Index i) { return w.normals.col(i).dot(x) - w.rhs(i); };
  auto dz_tiny = [&](const Eigen::VectorXd& z, Eigen::Index i) {
    return std::abs(z.dot(w.normals.col(i))) <= 1e-14 * scale * std::max(1.0, w.normals.col(i).squaredNorm());
  };

  QpSolution sol;
  for (Eigen::Index i = 0; i < me; ++i) {
    const Directions d = step_directions(w, active, i);
    if (dz_tiny(d.z, i)) {
      if (std::abs(slack(i)) > 1e-9 * (1.0 + std::abs(w.rhs(i))))
        throw Error(ErrorCode::SubproblemInfeasible, "inconsistent equality constraints");
      continue;  // redundant row
    }
    const double t = -slack(i) / d.z.dot(w.normals.col(i));
    x += t * d.z;
    for (size_t j = 0; j < active.size(); ++j) u[j] -= t * d.r(static_cast<Eigen::Index>(j));
    active.push_back(i);
    u.push_back(t);
  }

  const int max_iter = static_cast<int>(50 * (n + me + mi) + 100);
  int iter = 0;
  while (true) {
    Eigen::Index np = -1;
    double worst = 0.0;
    for (Eigen::Index i = me; i < me + mi; ++i) {
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      const double s = slack(i);
      const double thr = 1e-12 * (1.0 + std::abs(w.rhs(i)) + w.normals.col(i).norm() * x.norm());
      if (s < -thr && s < worst) {
        worst = s;
        np = i;
      }
    }
    if (np < 0) break;
    double u_plus = 0.0;
    while (true) {
      if (++iter > max_iter) throw Error(ErrorCode::NoConvergence, "active-set QP exceeded iteration budget");
      const Directions d = step_directions(w, active, np);
      double t1 = std::numeric_limits<double>::infinity();
      Eigen::Index drop = -1;
      for (size_t j = 0; j < active.size(); ++j) {
        if (active[j] < me) continue;
        const double rj = d.r(static_cast<Eigen::Index>(j));
        if (rj > 0.0 && u[j] / rj < t1) {
          t1 = u[j] / rj;
          drop = static_cast<Eigen::Index>(j);
        }
      }
      double t2 = std::numeric_limits<double>::infinity();
      const bool has_primal = !dz_tiny(d.z, np);
      if (has_primal) t2 = -slack(np) / d.z.dot(w.normals.col(np));
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) throw Error(ErrorCode::SubproblemInfeasible, "QP constraints are infeasible");
      for (size_t j = 0; j < active.size(); ++j) u[j] -= t * d.r(static_cast<Eigen::Index>(j));
      u_plus += t;
      if (has_primal) x += t * d.z;
      if (has_primal && t2 <= t1) {
        active.push_back(np);
        u.push_back(u_plus);
        break;
      }
      active.erase(active.begin() + drop);
      u.erase(u.begin() + drop);
    }
  }

  // Re-solve the final equality-constrained problem directly to strip the
  // rounding accumulated by the updates.
  if (!active.empty()) {
    const Eigen::Index k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd B(n, k);
    Eigen::VectorXd d(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      B.col(j) = w.half(w.normals.col(active[static_cast<size_t>(j)]));
      d(j) = w.rhs(active[static_cast<size_t>(j)]);
    }
    const Eigen::VectorXd q = w.half(qp.p);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(B);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const Eigen::VectorXd rhs = d + B.transpose() * q;
    const Eigen::VectorXd tmp = R.transpose().triangularView<Eigen::Lower>().solve(rhs);
    const Eigen::VectorXd uu = R.triangularView<Eigen::Upper>().solve(tmp);
    x = w.half_t(B * uu - q);
    for (Eigen::Index j = 0; j < k; ++j) u[static_cast<size_t>(j)] = uu(j);
  } else {
    x = -w.half_t(w.half(qp.p));
  }

  sol.x = x;
  sol.eq_multipliers = Vector::Zero(me);
  sol.ineq_multipliers = Vector::Zero(mi);
  for (size_t j = 0; j < active.size(); ++j) {
    const Eigen::Index i = active[j];
    if (i < me) sol.eq_multipliers(i) = -u[j];
    else sol.ineq_multipliers(i - me) = std::max(u[j], 0.0);
  }
  sol.iterations = iter;
  return sol;
}

StandardMultipliers standard_multipliers(const QpStandard& qp, const Vector& x, double active_tol) {
  qp.validate();
  require_size(x.size(), qp.n(), "standard multipliers point");
  const Eigen::Index n = qp.n(), m = qp.m();
  std::vector<Eigen::Index> act;
  for (Eigen::Index i = 0; i < n; ++i)
    if (x(i) <= active_tol) act.push_back(i);
  const Eigen::Index k = static_cast<Eigen::Index>(act.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, m + k);
  if (m > 0) M.leftCols(m) = qp.A.transpose();
  for (Eigen::Index j = 0; j < k; ++j) M(act[static_cast<size_t>(j)], m + j) = -1.0;
  const Eigen::VectorXd rhs = -(qp.Q * x + qp.p);
  const Eigen::VectorXd sol = M.colPivHouseholderQr().solve(rhs);
  StandardMultipliers out;
  out.nu = sol.head(m);
  out.zeta = Vector::Zero(n);
  for (Eigen::Index j = 0; j < k; ++j) out.zeta(act[static_cast<size_t>(j)]) = sol(m + j);
  out.stationarity = (M * sol - rhs).lpNorm<Eigen::Infinity>();
  return out;
}

double kkt_residual(const QpGeneral& qp, const Vector& x, const Vector& nu, const Vector& mu) {
  double r = (qp.Q * x + qp.p + qp.A.transpose() * nu + qp.G.transpose() * mu).lpNorm<Eigen::Infinity>();
  if (qp.A.rows() > 0) r = std::max(r, (qp.A * x - qp.b).lpNorm<Eigen::Infinity>());
  if (qp.G.rows() > 0) {
    const Vector s = qp.h - qp.G * x;
    r = std::max(r, (-s).cwiseMax(0.0).maxCoeff());
    r = std::max(r, (-mu).cwiseMax(0.0).maxCoeff());
    r = std::max(r, s.cwiseProduct(mu).cwiseAbs().maxCoeff());
  }
  return r;
}

}  // namespace foldcore
