#pragma once

// Dense real matrix kernel shared by every other module. Thin layer over
// Eigen that adds the input checks and tolerance conventions used throughout
// the library.

#include <algorithm>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asymlyap/error.hpp"

namespace asymlyap {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Eigenvalues of a real square matrix. Complex eigenvalues come in exact
/// conjugate pairs.
struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  std::optional<Eigen::MatrixXcd> eigenvectors;

  [[nodiscard]] std::size_t size() const noexcept { return eigenvalues.size(); }

  [[nodiscard]] double max_real() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& l : eigenvalues) m = std::max(m, l.real());
    return m;
  }

  [[nodiscard]] double min_real() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& l : eigenvalues) m = std::min(m, l.real());
    return m;
  }

  [[nodiscard]] double real_sum() const {
    double s = 0.0;
    for (const auto& l : eigenvalues) s += l.real();
    return s;
  }
};

/// Spectrum of a symmetric matrix: real values in descending order and the
/// matching orthonormal eigenvectors (one per column).
struct SymmetricSpectrum {
  Vector values;
  Matrix vectors;

  [[nodiscard]] Spectrum to_spectrum() const {
    Spectrum s;
    s.eigenvalues.reserve(static_cast<std::size_t>(values.size()));
    for (Index i = 0; i < values.size(); ++i) s.eigenvalues.emplace_back(values(i), 0.0);
    s.eigenvectors = vectors.cast<std::complex<double>>();
    return s;
  }
};

inline void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw Error(ErrorCode::NonFinite, what + " has NaN or Inf entries");
}

inline void require_square(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::NonSquare, what + " is " + std::to_string(m.rows()) + "x" +
                                          std::to_string(m.cols()));
  }
}

inline void require_shape(const Matrix& m, Index rows, Index cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::DimensionMismatch,
                what + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                    ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

/// Relative symmetry tolerance 1e-9 * (1 + ||m||_F).
inline double sym_tol(const Matrix& m) { return 1e-9 * (1.0 + m.norm()); }

inline double symmetry_residual(const Matrix& m) { return (m - m.transpose()).norm(); }

inline bool is_symmetric(const Matrix& m) {
  return m.rows() == m.cols() && symmetry_residual(m) <= sym_tol(m);
}

inline Matrix symmetric_part(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline Spectrum eig_general(const Matrix& m, bool with_vectors = false) {
  require_square(m, "eig_general input");
  require_finite(m, "eig_general input");
  Spectrum out;
  if (m.rows() == 0) return out;
  Eigen::EigenSolver<Matrix> solver(m, with_vectors);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::IterationLimit, "real Schur iteration did not converge");
  }
  const auto& values = solver.eigenvalues();
  out.eigenvalues.assign(values.data(), values.data() + values.size());
  if (with_vectors) out.eigenvectors = solver.eigenvectors();
  return out;
}

inline SymmetricSpectrum eig_sym(const Matrix& m) {
  require_square(m, "eig_sym input");
  require_finite(m, "eig_sym input");
  if (symmetry_residual(m) > sym_tol(m)) {
    throw Error(ErrorCode::NotSymmetric,
                "asymmetry " + std::to_string(symmetry_residual(m)) + " exceeds tolerance");
  }
  SymmetricSpectrum out;
  if (m.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric_part(m));
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::IterationLimit, "symmetric eigensolver did not converge");
  }
  // Eigen sorts ascending.
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

inline double min_eig_sym(const Matrix& m) {
  const auto s = eig_sym(m);
  if (s.values.size() == 0) throw Error(ErrorCode::DimensionMismatch, "empty matrix");
  return s.values(s.values.size() - 1);
}

inline double max_eig_sym(const Matrix& m) {
  const auto s = eig_sym(m);
  if (s.values.size() == 0) throw Error(ErrorCode::DimensionMismatch, "empty matrix");
  return s.values(0);
}

/// Smallest eigenvalue of the symmetric part, without a symmetry check. Used
/// for definiteness margins of assembled constraint blocks.
inline double min_eig_of_symmetric_part(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetric_part(m), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

/// Solves a * x = b with partial pivoting. A pivot below 1e-12 times the
/// largest row norm of `a` is reported as Singular.
inline Matrix solve_linear(const Matrix& a, const Matrix& b) {
  require_square(a, "solve_linear lhs");
  require_finite(a, "solve_linear lhs");
  require_finite(b, "solve_linear rhs");
  if (b.rows() != a.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "rhs has " + std::to_string(b.rows()) +
                                                  " rows, lhs has " + std::to_string(a.rows()));
  }
  if (a.rows() == 0) return Matrix(0, b.cols());
  const double max_row = a.rowwise().norm().maxCoeff();
  Eigen::PartialPivLU<Matrix> lu(a);
  const auto diag = lu.matrixLU().diagonal().cwiseAbs();
  if (max_row == 0.0 || diag.minCoeff() <= 1e-12 * max_row) {
    throw Error(ErrorCode::Singular, "pivot below 1e-12 * max row norm");
  }
  return lu.solve(b);
}

inline double spectral_abscissa(const Matrix& m) { return eig_general(m).max_real(); }

/// Hurwitz with a strict margin: max Re(lambda) < -1e-9.
inline constexpr double kHurwitzThreshold = -1e-9;

inline bool is_hurwitz(const Matrix& m) { return spectral_abscissa(m) < kHurwitzThreshold; }

inline bool is_positive_definite(const Matrix& m) {
  if (m.rows() != m.cols() || !is_symmetric(m)) return false;
  Eigen::LLT<Matrix> llt(symmetric_part(m));
  return llt.info() == Eigen::Success;
}

}  // namespace asymlyap
