#pragma once

#include <string>

#include <Eigen/Dense>

#include "asymlyap/error.hpp"
#include "asymlyap/matops.hpp"

namespace asymlyap {

/// x' = A x + B u
struct LtiSystem {
  Matrix a;
  Matrix b;

  [[nodiscard]] Index states() const noexcept { return a.rows(); }
  [[nodiscard]] Index inputs() const noexcept { return b.cols(); }
};

/// J = integral of x^T Q x + u^T R u, with Q >= 0 and R > 0.
struct QuadraticCost {
  Matrix q;
  Matrix r;
};

/// Q is accepted as positive semidefinite down to this eigenvalue.
inline constexpr double kQPsdFloor = -1e-10;

inline void validate_system(const LtiSystem& sys) {
  require_square(sys.a, "A");
  require_finite(sys.a, "A");
  require_finite(sys.b, "B");
  if (sys.b.rows() != sys.a.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "B must have as many rows as A");
  }
}

inline void validate_cost(const LtiSystem& sys, const QuadraticCost& cost) {
  require_shape(cost.q, sys.states(), sys.states(), "Q");
  require_shape(cost.r, sys.inputs(), sys.inputs(), "R");
  require_finite(cost.q, "Q");
  require_finite(cost.r, "R");
  if (!is_symmetric(cost.q)) throw Error(ErrorCode::NotSymmetric, "Q is not symmetric");
  if (sys.states() > 0 && min_eig_sym(cost.q) < kQPsdFloor) {
    throw Error(ErrorCode::NotPositiveDefinite, "Q is not positive semidefinite");
  }
  if (!is_positive_definite(cost.r)) {
    throw Error(ErrorCode::RNotPositiveDefinite, "R must be symmetric positive definite");
  }
}

/// R^-1 M via Cholesky of R.
inline Matrix r_inverse_times(const Matrix& r, const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetric_part(r));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::RNotPositiveDefinite, "Cholesky factorization of R failed");
  }
  return llt.solve(m);
}

/// S = B R^-1 B^T, the input weighting that appears in every LMI.
inline Matrix input_weight(const LtiSystem& sys, const QuadraticCost& cost) {
  return symmetric_part(sys.b * r_inverse_times(cost.r, sys.b.transpose()));
}

}  // namespace asymlyap
