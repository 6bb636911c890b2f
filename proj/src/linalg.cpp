#include "foldcore/linalg.hpp"

#include <cmath>
#include <complex>
#include <sstream>

namespace foldcore {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::Breakdown: return "Breakdown";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonFiniteProbe: return "NonFiniteProbe";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::DegenerateFreeSet: return "DegenerateFreeSet";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::SingularKkt: return "SingularKkt";
    case ErrorCode::SubproblemInfeasible: return "SubproblemInfeasible";
    case ErrorCode::NotAFixedPoint: return "NotAFixedPoint";
    case ErrorCode::SingularSystem: return "SingularSystem";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what, std::optional<double> estimate)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
      code_(code),
      estimate_(estimate) {}

void require_finite(const Vector& v, const char* what) {
  if (!all_finite(v)) throw Error(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m)) throw Error(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

void require_size(Eigen::Index got, Eigen::Index want, const char* what) {
  if (got != want) {
    std::ostringstream os;
    os << what << ": expected length " << want << ", got " << got;
    throw Error(ErrorCode::ShapeMismatch, os.str());
  }
}

LuFactorization::LuFactorization(const Matrix& a) : lu_(a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::ShapeMismatch, "lu: matrix must be square");
  require_finite(a, "lu matrix");
  const Eigen::Index n = a.rows();
  perm_.resize(static_cast<size_t>(n));
  Vector row_scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    perm_[static_cast<size_t>(i)] = i;
    row_scale(i) = a.row(i).cwiseAbs().maxCoeff();
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index piv = k;
    double best = std::abs(lu_(k, k));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(lu_(i, k)) > best) {
        best = std::abs(lu_(i, k));
        piv = i;
      }
    }
    if (piv != k) {
      lu_.row(k).swap(lu_.row(piv));
      std::swap(perm_[static_cast<size_t>(k)], perm_[static_cast<size_t>(piv)]);
      std::swap(row_scale(k), row_scale(piv));
    }
    const double scale = row_scale(k);
    if (scale == 0.0 || best < 1e-12 * scale) {
      std::ostringstream os;
      os << "pivot " << best << " at column " << k << " below 1e-12 of row scale " << scale;
      throw Error(ErrorCode::SingularMatrix, os.str(), best);
    }
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = lu_(i, k) / lu_(k, k);
      lu_(i, k) = f;
      if (f != 0.0) lu_.row(i).tail(n - k - 1) -= f * lu_.row(k).tail(n - k - 1);
    }
  }
}

Vector LuFactorization::solve(const Vector& b) const {
  const Eigen::Index n = dim();
  require_size(b.size(), n, "lu solve rhs");
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = b(perm_[static_cast<size_t>(i)]);
    for (Eigen::Index j = 0; j < i; ++j) s -= lu_(i, j) * y(j);
    y(i) = s;
  }
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = y(i);
    for (Eigen::Index j = i + 1; j < n; ++j) s -= lu_(i, j) * y(j);
    y(i) = s / lu_(i, i);
  }
  return y;
}

Vector LuFactorization::solve_transpose(const Vector& b) const {
  // PA = LU, so Aᵀx = b becomes Uᵀ(Lᵀ(Px)) = b.
  const Eigen::Index n = dim();
  require_size(b.size(), n, "lu transpose solve rhs");
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = b(i);
    for (Eigen::Index j = 0; j < i; ++j) s -= lu_(j, i) * w(j);
    w(i) = s / lu_(i, i);
  }
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = w(i);
    for (Eigen::Index j = i + 1; j < n; ++j) s -= lu_(j, i) * w(j);
    w(i) = s;
  }
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(perm_[static_cast<size_t>(i)]) = w(i);
  return x;
}

Vector lu_solve(const Matrix& a, const Vector& b) {
  require_size(b.size(), a.rows(), "lu_solve rhs");
  require_finite(b, "lu_solve rhs");
  return LuFactorization(a).solve(b);
}

LinearOperator as_operator(const Matrix& m) {
  LinearOperator op;
  op.dim_in = m.cols();
  op.dim_out = m.rows();
  op.apply = [m](const Vector& v) -> Vector {
    require_size(v.size(), m.cols(), "operator input");
    return m * v;
  };
  op.apply_transpose = [m](const Vector& w) -> Vector {
    require_size(w.size(), m.rows(), "operator adjoint input");
    return m.transpose() * w;
  };
  return op;
}

namespace {

// Modulus of the dominant root of mu^2 - a mu - b fitted to three iterates.
// Returns a negative value when the fit is not usable.
double recurrence_modulus(const Vector& x0, const Vector& x1, const Vector& x2) {
  const double g00 = x0.dot(x0), g01 = x0.dot(x1), g11 = x1.dot(x1);
  const double det = g00 * g11 - g01 * g01;
  if (det <= 1e-10 * g00 * g11) return -1.0;
  const double r0 = x0.dot(x2), r1 = x1.dot(x2);
  // Least-squares x2 ≈ a x1 + b x0.
  const double a = (g00 * r1 - g01 * r0) / det;
  const double b = (g11 * r0 - g01 * r1) / det;
  const std::complex<double> disc = std::sqrt(std::complex<double>(a * a + 4.0 * b, 0.0));
  const double m1 = std::abs((a + disc) / 2.0);
  const double m2 = std::abs((a - disc) / 2.0);
  return std::max(m1, m2);
}

}  // namespace

double spectral_radius(const LinearOperator& op, int max_iter, double tol) {
  if (op.dim_in != op.dim_out || op.dim_in < 1)
    throw Error(ErrorCode::ShapeMismatch, "spectral_radius needs a square operator of dimension >= 1");
  const Eigen::Index n = op.dim_in;
  if (n == 1) {
    Vector one = Vector::Ones(1);
    return std::abs(op.apply(one)(0));
  }
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = 1.0 / static_cast<double>(i + 1);
  x.normalize();

  Vector prev = x;
  Vector cur = op.apply(x);
  double nc = cur.norm();
  if (nc == 0.0) return 0.0;
  double estimate = nc;
  double last = -1.0;
  int stable = 0;
  for (int it = 0; it < max_iter; ++it) {
    // Rescale both iterates by the same factor to keep the recurrence fit valid.
    prev /= nc;
    cur /= nc;
    Vector next = op.apply(cur);
    require_finite(next, "spectral_radius iterate");
    const double nn = next.norm();
    if (nn == 0.0) return 0.0;
    double est = recurrence_modulus(prev, cur, next);
    if (est < 0.0) est = nn / cur.norm();
    estimate = est;
    if (last >= 0.0 && std::abs(est - last) < tol * std::max(1.0, est)) {
      // Two consecutive agreements guard against accidental crossings.
      if (++stable >= 2) return estimate;
    } else {
      stable = 0;
    }
    last = est;
    prev = cur;
    cur = next;
    nc = cur.norm();
  }
  throw Error(ErrorCode::NoConvergence, "spectral_radius did not settle", estimate);
}

}  // namespace foldcore
