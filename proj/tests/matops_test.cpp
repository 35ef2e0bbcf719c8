#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "asymlyap/matops.hpp"
#include "support/generators.hpp"

using namespace asymlyap;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

std::vector<double> sorted_real(const Spectrum& s) {
  std::vector<double> out;
  for (const auto& l : s.eigenvalues) out.push_back(l.real());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(EigGeneral, Identity) {
  const auto s = eig_general(Matrix::Identity(2, 2));
  ASSERT_EQ(s.size(), 2u);
  for (const auto& l : s.eigenvalues) {
    EXPECT_NEAR(l.real(), 1.0, 1e-14);
    EXPECT_NEAR(l.imag(), 0.0, 1e-14);
  }
}

TEST(EigGeneral, RotationGeneratorHasConjugatePair) {
  const auto s = eig_general(mat2(0, 1, -1, 0));
  ASSERT_EQ(s.size(), 2u);
  std::vector<double> imag{s.eigenvalues[0].imag(), s.eigenvalues[1].imag()};
  std::sort(imag.begin(), imag.end());
  EXPECT_NEAR(imag[0], -1.0, 1e-14);
  EXPECT_NEAR(imag[1], 1.0, 1e-14);
  EXPECT_NEAR(s.eigenvalues[0].real(), 0.0, 1e-14);
  EXPECT_EQ(s.eigenvalues[0], std::conj(s.eigenvalues[1]));
}

TEST(EigGeneral, NearlySymmetricClosedLoopMatchesQuadraticFormula) {
  const Matrix m = mat2(-4.4484, -0.0068, -0.0068, -4.1276);
  const double tr = m.trace();
  const double det = m.determinant();
  const double disc = std::sqrt(tr * tr / 4.0 - det);
  const auto got = sorted_real(eig_general(m));
  EXPECT_NEAR(got[0], tr / 2.0 - disc, 1e-12);
  EXPECT_NEAR(got[1], tr / 2.0 + disc, 1e-12);
  EXPECT_NEAR(got[0], -4.45, 5e-3);
  EXPECT_NEAR(got[1], -4.13, 5e-3);
}

TEST(EigGeneral, Errors) {
  EXPECT_THROW(eig_general(Matrix::Zero(2, 3)), Error);
  try {
    eig_general(Matrix::Zero(2, 3));
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonSquare);
  }
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    eig_general(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
}

TEST(EigSym, DiagonalDescending) {
  const Matrix m = Vector::Map(std::vector<double>{1.0, 3.0}.data(), 2).asDiagonal();
  const auto s = eig_sym(m);
  EXPECT_DOUBLE_EQ(s.values(0), 3.0);
  EXPECT_DOUBLE_EQ(s.values(1), 1.0);
}

TEST(EigSym, TwoByTwoClosedForm) {
  const auto s = eig_sym(mat2(2, 1, 1, 2));
  EXPECT_NEAR(s.values(0), 3.0, 1e-14);
  EXPECT_NEAR(s.values(1), 1.0, 1e-14);
  const Matrix v = s.vectors;
  EXPECT_NEAR((v.transpose() * v - Matrix::Identity(2, 2)).norm(), 0.0, 1e-14);
}

TEST(EigSym, ZeroMatrix) {
  const auto s = eig_sym(Matrix::Zero(3, 3));
  ASSERT_EQ(s.values.size(), 3);
  EXPECT_EQ(s.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(EigSym, RejectsAsymmetric) {
  try {
    eig_sym(mat2(1, 2, 0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSymmetric);
  }
}

TEST(EigSym, ToleratesRoundingAsymmetry) {
  Matrix m = mat2(2, 1, 1, 2);
  m(0, 1) += 1e-12;
  EXPECT_NO_THROW(eig_sym(m));
}

TEST(SolveLinear, Identity) {
  const Matrix b = mat2(1, -2, 3.5, 4);
  EXPECT_EQ(solve_linear(Matrix::Identity(2, 2), b), b);
}

TEST(SolveLinear, Diagonal) {
  Vector b(2);
  b << 2, 4;
  const Matrix x = solve_linear(mat2(2, 0, 0, 4), b);
  EXPECT_NEAR(x(0), 1.0, 1e-15);
  EXPECT_NEAR(x(1), 1.0, 1e-15);
}

TEST(SolveLinear, BackSubstitution) {
  Vector b(2);
  b << 3, 1;
  const Matrix x = solve_linear(mat2(1, 1, 0, 1), b);
  EXPECT_NEAR(x(0), 2.0, 1e-15);
  EXPECT_NEAR(x(1), 1.0, 1e-15);
}

TEST(SolveLinear, Errors) {
  try {
    solve_linear(mat2(1, 2, 2, 4), Vector::Ones(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Singular);
  }
  try {
    solve_linear(Matrix::Identity(2, 2), Vector::Ones(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(MinEigSym, Examples) {
  EXPECT_DOUBLE_EQ(min_eig_sym(Matrix::Identity(3, 3)), 1.0);
  EXPECT_DOUBLE_EQ(min_eig_sym(mat2(-1, 0, 0, 5)), -1.0);
  EXPECT_NEAR(min_eig_sym(mat2(2, 1, 1, 2)), 1.0, 1e-14);
  EXPECT_THROW(min_eig_sym(mat2(0, 1, 0, 0)), Error);
}

TEST(Hurwitz, StrictThreshold) {
  EXPECT_TRUE(is_hurwitz(-Matrix::Identity(2, 2)));
  EXPECT_FALSE(is_hurwitz(Matrix::Zero(2, 2)));
  EXPECT_FALSE(is_hurwitz(-1e-10 * Matrix::Identity(2, 2)));
  EXPECT_FALSE(is_hurwitz(mat2(0, 1, -1, 0)));
}

TEST(MatopsProperty, SymmetricAndGeneralSolversAgree) {
  gen::Source src(101);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = src.size(1, 6);
    const Matrix m = src.symmetric(n);
    const auto sym = eig_sym(m);
    auto gen_vals = sorted_real(eig_general(m));
    std::vector<double> sym_vals(sym.values.data(), sym.values.data() + n);
    std::sort(sym_vals.begin(), sym_vals.end());
    for (Index i = 0; i < n; ++i) EXPECT_NEAR(gen_vals[static_cast<std::size_t>(i)], sym_vals[static_cast<std::size_t>(i)], 1e-8);
  }
}

TEST(MatopsProperty, EigenReconstruction) {
  gen::Source src(102);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = src.size(1, 8);
    const Matrix m = src.symmetric(n);
    const auto s = eig_sym(m);
    Matrix rebuilt = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) rebuilt += s.values(i) * s.vectors.col(i) * s.vectors.col(i).transpose();
    EXPECT_LE((m - rebuilt).norm(), 1e-8 * std::max(m.norm(), 1e-300));
  }
}

TEST(MatopsProperty, SolveThenMultiplyReturnsRhs) {
  gen::Source src(103);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = src.size(1, 8);
    const Matrix a = src.gaussian(n, n) + 0.5 * n * Matrix::Identity(n, n);
    const Matrix b = src.gaussian(n, src.size(1, 3));
    const Matrix x = solve_linear(a, b);
    EXPECT_LE((a * x - b).norm(), 1e-10 * (1.0 + b.norm()));
  }
}

TEST(MatopsProperty, TraceEqualsEigenvalueSum) {
  gen::Source src(104);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = src.size(1, 8);
    const Matrix m = src.gaussian(n, n);
    const auto s = eig_general(m);
    double imag = 0.0;
    for (const auto& l : s.eigenvalues) imag += l.imag();
    EXPECT_NEAR(s.real_sum(), m.trace(), 1e-8 * (1.0 + m.norm()));
    EXPECT_NEAR(imag, 0.0, 1e-8 * (1.0 + m.norm()));
  }
}

TEST(MatopsProperty, ConjugatePairClosure) {
  gen::Source src(105);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = src.size(2, 7);
    const auto s = eig_general(src.gaussian(n, n));
    for (const auto& l : s.eigenvalues) {
      if (l.imag() == 0.0) continue;
      const bool found = std::any_of(s.eigenvalues.begin(), s.eigenvalues.end(),
                                     [&](const auto& o) { return o == std::conj(l); });
      EXPECT_TRUE(found);
    }
  }
}
