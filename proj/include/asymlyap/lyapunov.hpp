#pragma once

// Matrix-equation solvers built on the real Schur form (Bartels-Stewart):
// the continuous Lyapunov equation F^T Z + Z F + C = 0 and the P-hat
// equation A_cl P + P^T A_cl + W = 0 for a symmetric Hurwitz A_cl.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asymlyap/error.hpp"
#include "asymlyap/matops.hpp"

namespace asymlyap {

namespace detail {

/// Diagonal block boundaries of an upper quasi-triangular matrix: 1x1 blocks
/// for real eigenvalues, 2x2 blocks for complex pairs.
inline std::vector<std::pair<Index, Index>> schur_blocks(const Matrix& t) {
  std::vector<std::pair<Index, Index>> blocks;
  const Index n = t.rows();
  Index i = 0;
  while (i < n) {
    const Index size = (i + 1 < n && t(i + 1, i) != 0.0) ? 2 : 1;
    blocks.emplace_back(i, size);
    i += size;
  }
  return blocks;
}

/// Solves T^T Z + Z S = C for upper quasi-triangular T (n x n) and S (m x m).
/// Z is filled block by block, each block a Kronecker system of size <= 4.
inline Matrix solve_quasi_triangular_sylvester(const Matrix& t, const Matrix& s, const Matrix& c) {
  const auto row_blocks = schur_blocks(t);
  const auto col_blocks = schur_blocks(s);
  Matrix z = Matrix::Zero(t.rows(), s.rows());

  for (const auto& [i0, p] : row_blocks) {
    for (const auto& [j0, q] : col_blocks) {
      // (T^T)_{ik} = T_{ki}^T is nonzero only for k <= i.
      Matrix rhs = c.block(i0, j0, p, q);
      if (i0 > 0) rhs.noalias() -= t.block(0, i0, i0, p).transpose() * z.block(0, j0, i0, q);
      if (j0 > 0) rhs.noalias() -= z.block(i0, 0, p, j0) * s.block(0, j0, j0, q);

      const Matrix tii_t = t.block(i0, i0, p, p).transpose();
      const Matrix sjj = s.block(j0, j0, q, q);
      // vec(T_ii^T Z + Z S_jj) = (I_q (x) T_ii^T + S_jj^T (x) I_p) vec(Z)
      Matrix kron = Matrix::Zero(p * q, p * q);
      for (Index b = 0; b < q; ++b) {
        kron.block(b * p, b * p, p, p) += tii_t;
        for (Index a = 0; a < q; ++a) {
          kron.block(b * p, a * p, p, p) += sjj(a, b) * Matrix::Identity(p, p);
        }
      }
      const Vector rhs_vec = Eigen::Map<const Vector>(rhs.data(), p * q);
      Eigen::FullPivLU<Matrix> lu(kron);
      if (!lu.isInvertible()) {
        throw Error(ErrorCode::Singular, "Sylvester operator is singular (lambda_i + mu_j = 0)");
      }
      const Vector sol = lu.solve(rhs_vec);
      z.block(i0, j0, p, q) = Eigen::Map<const Matrix>(sol.data(), p, q);
    }
  }
  return z;
}

}  // namespace detail

/// Residual F^T Z + Z F + C.
inline Matrix lyapunov_residual(const Matrix& f, const Matrix& z, const Matrix& c) {
  return f.transpose() * z + z * f + c;
}

/// Relative residual target lyap_tol = 1e-9 * (1 + ||C||_F).
inline double lyap_tol(const Matrix& c) { return 1e-9 * (1.0 + c.norm()); }

/// Solves F^T Z + Z F + C = 0 for Hurwitz F and symmetric C. The result is
/// symmetric, and positive semidefinite whenever C is.
inline Matrix solve_lyapunov(const Matrix& f, const Matrix& c) {
  require_square(f, "Lyapunov F");
  require_finite(f, "Lyapunov F");
  require_finite(c, "Lyapunov C");
  require_shape(c, f.rows(), f.cols(), "Lyapunov C");
  if (symmetry_residual(c) > sym_tol(c)) {
    throw Error(ErrorCode::NotSymmetricRhs, "right-hand side C is not symmetric");
  }
  const double abscissa = spectral_abscissa(f);
  if (!(abscissa < kHurwitzThreshold)) {
    throw Error(ErrorCode::NotHurwitz, "spectral abscissa " + std::to_string(abscissa));
  }
  const Index n = f.rows();
  if (n == 0) return Matrix(0, 0);

  Eigen::RealSchur<Matrix> schur(f);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorCode::IterationLimit, "real Schur reduction did not converge");
  }
  const Matrix& t = schur.matrixT();
  const Matrix& u = schur.matrixU();

  // F = U T U^T turns the equation into T^T Zt + Zt T = -U^T C U.
  const Matrix ct = -(u.transpose() * symmetric_part(c) * u);
  Matrix z = u * detail::solve_quasi_triangular_sylvester(t, t, ct) * u.transpose();
  z = symmetric_part(z);

  // One step of iterative refinement when rounding leaves a visible residual.
  const Matrix res = lyapunov_residual(f, z, c);
  if (res.norm() > 1e-3 * lyap_tol(c)) {
    const Matrix dct = u.transpose() * symmetric_part(res) * u;
    z += symmetric_part(u * detail::solve_quasi_triangular_sylvester(t, t, dct) * u.transpose());
  }
  return z;
}

/// Residual A_cl P + P^T A_cl + W of the P-hat equation.
inline Matrix p_hat_residual(const Matrix& a_cl, const Matrix& p_hat, const Matrix& w) {
  return a_cl * p_hat + p_hat.transpose() * a_cl + w;
}

/// Symmetric solution of A_cl P + P^T A_cl + W = 0.
///
/// The equation is singular as a linear map on general matrices (skew
/// homogeneous solutions exist), so the solution returned is the one that
/// also solves the Lyapunov equation A_cl^T P + P A_cl + W = 0. A_cl must be
/// symmetric within sym_tol and Hurwitz; W must be positive definite.
inline Matrix solve_p_hat(const Matrix& a_cl, const Matrix& w) {
  require_square(a_cl, "closed-loop matrix");
  require_finite(a_cl, "closed-loop matrix");
  require_shape(w, a_cl.rows(), a_cl.cols(), "W");
  if (symmetry_residual(a_cl) > sym_tol(a_cl)) {
    throw Error(ErrorCode::NotSymmetric, "closed-loop asymmetry " +
                                             std::to_string(symmetry_residual(a_cl)) +
                                             " exceeds tolerance");
  }
  if (!is_hurwitz(a_cl)) {
    throw Error(ErrorCode::NotHurwitz, "closed-loop matrix is not Hurwitz");
  }
  if (!is_positive_definite(w)) {
    throw Error(ErrorCode::NotPositiveDefinite, "W must be symmetric positive definite");
  }
  return solve_lyapunov(a_cl, w);
}

}  // namespace asymlyap
