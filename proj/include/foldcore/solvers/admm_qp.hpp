#pragma once

#include "foldcore/diff_step.hpp"
#include "foldcore/linalg.hpp"
#include "foldcore/qp.hpp"

namespace foldcore {

// Maps a parameter vector c to standard-form QP data, and cotangents of the
// data back to c.
class QpParametrization {
 public:
  virtual ~QpParametrization() = default;
  virtual Eigen::Index n() const = 0;
  virtual Eigen::Index m() const = 0;
  virtual Eigen::Index param_dim() const = 0;
  virtual QpStandard build(const Vector& c) const = 0;
  virtual Vector pullback(const Vector& c, const QpStandardCotangent& bar) const = 0;
};

// Q and A fixed; p = p0 + P c[0:kp], b = b0 + B c[kp:].
class AffineQpParametrization : public QpParametrization {
 public:
  AffineQpParametrization(QpStandard base, Matrix P, Matrix B);
  // Linear term is the whole parameter: p = c.
  static std::shared_ptr<AffineQpParametrization> linear_term(QpStandard base);

  Eigen::Index n() const override { return base_.n(); }
  Eigen::Index m() const override { return base_.m(); }
  Eigen::Index param_dim() const override { return P_.cols() + B_.cols(); }
  QpStandard build(const Vector& c) const override;
  Vector pullback(const Vector& c, const QpStandardCotangent& bar) const override;

 private:
  QpStandard base_;
  Matrix P_, B_;
};

// Every entry is a parameter: c = [vec Q, p, vec A, b], row-major.
class DenseQpParametrization : public QpParametrization {
 public:
  DenseQpParametrization(Eigen::Index n, Eigen::Index m) : n_(n), m_(m) {}
  static Vector pack(const QpStandard& qp);
  static Vector pack(const QpStandardCotangent& bar);

  Eigen::Index n() const override { return n_; }
  Eigen::Index m() const override { return m_; }
  Eigen::Index param_dim() const override { return n_ * n_ + n_ + m_ * n_ + m_; }
  QpStandard build(const Vector& c) const override;
  Vector pullback(const Vector& c, const QpStandardCotangent& bar) const override;
  QpStandardCotangent unpack_cotangent(const Vector& c_bar) const;

 private:
  Eigen::Index n_, m_;
};

// Factorized KKT matrix [[Q + ρI, Aᵀ], [A, 0]].
class AdmmKkt {
 public:
  AdmmKkt(const QpStandard& qp, double rho);
  // [x⁺; ν] for the right-hand side [−p + ρ(z − u); b].
  Vector solve(const QpStandard& qp, const Vector& z, const Vector& u) const;
  Vector solve_transpose(const Vector& rhs) const { return lu_.solve_transpose(rhs); }

 private:
  double rho_;
  LuFactorization lu_;
};

class AdmmQpStep;

// Linearization of one ADMM update at (s, c). Also exposes the pullback of
// the KKT solve so that readouts of ν can reuse the factorization.
class AdmmQpLinearization : public StepLinearization {
 public:
  AdmmQpLinearization(const AdmmQpStep& step, const Vector& s, const Vector& c);

  Vector vjp_state(const Vector& v) const override;
  Vector vjp_param(const Vector& v) const override;

  // ν of the KKT solve at this point.
  Vector kkt_dual() const { return sol_.tail(qp_.m()); }
  // (state cotangent, parameter cotangent) of ν.
  std::pair<Vector, Vector> kkt_dual_vjp(const Vector& nu_bar) const;

 private:
  void kkt_backprop(const Vector& sol_bar, Vector& state_bar, QpStandardCotangent* data_bar) const;
  void backprop(const Vector& v, Vector& state_bar, QpStandardCotangent* data_bar) const;

  const AdmmQpStep& step_;
  Vector c_;
  QpStandard qp_;
  AdmmKkt kkt_;
  Vector sol_;
  Vector pos_;
};

// ADMM on the standard form over state (x, z, u) ∈ R^{3n}:
//   [x⁺; ν] = KKT⁻¹[−p + ρ(z − u); b],  z⁺ = (x⁺ + u)₊,  u⁺ = u + x⁺ − z⁺.
class AdmmQpStep : public DifferentiableStep {
 public:
  AdmmQpStep(std::shared_ptr<const QpParametrization> param, double rho = 1.0);

  Eigen::Index state_dim() const override { return 3 * param_->n(); }
  Eigen::Index param_dim() const override { return param_->param_dim(); }
  Vector forward(const Vector& s, const Vector& c) const override;
  std::unique_ptr<StepLinearization> linearize(const Vector& s, const Vector& c) const override;
  std::unique_ptr<AdmmQpLinearization> linearize_admm(const Vector& s, const Vector& c) const;

  double rho() const { return rho_; }
  const QpParametrization& parametrization() const { return *param_; }

  // Equality multiplier ν produced by the KKT solve at state s.
  Vector kkt_dual(const Vector& s, const Vector& c) const;
  // Cotangent of ν pulled back onto (state, c).
  std::pair<Vector, Vector> kkt_dual_vjp(const Vector& s, const Vector& c, const Vector& nu_bar) const;

 private:
  std::shared_ptr<const QpParametrization> param_;
  double rho_;
};

struct AdmmResult {
  Vector state;  // (x, z, u)
  Vector nu;
  int iterations = 0;
  bool converged = false;
};

// Iterates the ADMM update with one cached factorization until the state
// moves less than tol (infinity norm).
AdmmResult admm_qp_solve(const QpStandard& qp, double rho, double tol, int max_iter, const Vector* state0 = nullptr);

// Exact ADMM fixed point (x, x, −ζ/ρ) for a known optimal x, using the KKT
// multipliers recovered from stationarity.
Vector admm_fixed_point(const QpStandard& qp, const Vector& x, double rho);

}  // namespace foldcore
