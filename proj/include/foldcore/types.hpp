#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace foldcore {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  NonFinite,
  SingularMatrix,
  NoConvergence,
  Divergence,
  Breakdown,
  InsufficientData,
  NonFiniteProbe,
  TooLarge,
  DegenerateFreeSet,
  NonFiniteGradient,
  SingularKkt,
  SubproblemInfeasible,
  NotAFixedPoint,
  SingularSystem,
};

const char* error_code_name(ErrorCode code);

// All library failures are reported through this type. `estimate` carries a
// numeric diagnostic where one exists (last power-iteration estimate, the
// offending residual, an estimated spectral radius).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<double> estimate = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<double> estimate() const noexcept { return estimate_; }

 private:
  ErrorCode code_;
  std::optional<double> estimate_;
};

inline bool all_finite(const Vector& v) { return v.array().isFinite().all(); }
inline bool all_finite(const Matrix& m) { return m.array().isFinite().all(); }

// Throws NonFinite naming `what` if any entry is NaN or infinite.
void require_finite(const Vector& v, const char* what);
void require_finite(const Matrix& m, const char* what);
void require_size(Eigen::Index got, Eigen::Index want, const char* what);

}  // namespace foldcore
