#pragma once

#include "foldcore/folding.hpp"
#include "foldcore/solvers/fdpg.hpp"

namespace foldcore {

// Total-variation style denoiser u*(D) = argmin ½‖u − d‖² + λ‖Du‖₁ with the
// analysis operator D as the learnable parameter, solved by FDPG and folded
// through the FDPG update.
class DenoiseLayer {
 public:
  explicit DenoiseLayer(double lambda, double forward_tol = 1e-10, FoldingOptions folding = {});

  struct Output {
    Vector u;      // denoised signal
    Vector state;  // (w, y)
    double t = 1.0;
    double lipschitz = 4.0;
    int iterations = 0;
  };

  Output forward(const Matrix& D, const Vector& d) const;
  // ū ↦ D̄ through both the fixed point and the primal readout.
  Matrix vjp(const Matrix& D, const Vector& d, const Output& out, const Vector& u_bar) const;
  // The folded layer at a computed solution (parameters vec(D), row-major).
  FoldedLayer layer(const Matrix& D, const Vector& d, const Output& out) const;

  double lambda() const { return lambda_; }

 private:
  double lambda_;
  double forward_tol_;
  FoldingOptions folding_;
};

inline Vector flatten_row_major(const Matrix& D) { return Eigen::Map<const Vector>(D.data(), D.size()); }

}  // namespace foldcore
