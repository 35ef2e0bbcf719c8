#pragma once

// Optimal LQ baseline: the stabilizing solution of
//   A^T P + P A + Q - P B R^-1 B^T P = 0
// by Newton-Kleinman iteration. Each step is one Lyapunov solve.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asymlyap/error.hpp"
#include "asymlyap/lmi.hpp"
#include "asymlyap/lyapunov.hpp"
#include "asymlyap/matops.hpp"
#include "asymlyap/sdpsolve.hpp"
#include "asymlyap/system.hpp"

namespace asymlyap {

struct CareSolution {
  Matrix p_star;
  Matrix k_star;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;

  [[nodiscard]] double j_star_of(const Vector& x0) const {
    require_shape(x0, p_star.rows(), 1, "x0");
    return x0.dot(p_star * x0);
  }
};

struct CareOptions {
  int max_iterations = 100;
  /// Residual target; defaults to 1e-9 * (1 + ||Q||_F).
  std::optional<double> tolerance;
};

inline double care_tol(const QuadraticCost& cost) { return 1e-9 * (1.0 + cost.q.norm()); }

inline Matrix care_residual(const LtiSystem& sys, const QuadraticCost& cost, const Matrix& p) {
  const Matrix s = input_weight(sys, cost);
  return sys.a.transpose() * p + p * sys.a + cost.q - p * s * p;
}

/// A gain K with A - B K Hurwitz, from the stabilization LMI
/// X A^T + A X - Y^T S - S Y < 0, X > 0, as K = R^-1 B^T Y X^-1.
/// Returns nullopt when the LMI is infeasible (the pair is not stabilizable).
inline std::optional<Matrix> stabilizing_gain(const LtiSystem& sys, const QuadraticCost& cost,
                                              const FeasibilityOptions& opts = {}) {
  validate_system(sys);
  validate_cost(sys, cost);
  const Index n = sys.states();
  VariableLayout layout;
  layout.add_symmetric("X", n).add_general("Y", n, n);
  const double margin = strictness_margin(sys, kDefaultEpsilon);
  const std::vector<AffineMatrixConstraint> constraints{
      build_stability_lmi(sys, cost, layout),
      AffineMatrixConstraint::from_expr("X positive", layout.expr("X"),
                                        ConstraintSense::PositiveDefinite, margin),
  };
  const auto result = solve_feasibility(constraints, layout, opts);
  if (!result.feasible()) return std::nullopt;
  const Matrix x = layout.extract("X", *result.assignment);
  const Matrix y = layout.extract("Y", *result.assignment);
  const Matrix p = solve_linear(x, y.transpose()).transpose();
  const Matrix k = r_inverse_times(cost.r, sys.b.transpose() * p);
  if (!is_hurwitz(sys.a - sys.b * k)) return std::nullopt;
  return k;
}

/// Stabilizing CARE solution. Without `k0`, K = 0 seeds the iteration when
/// A is Hurwitz, otherwise the stabilization LMI supplies the seed.
inline CareSolution solve_care(const LtiSystem& sys, const QuadraticCost& cost,
                               const std::optional<Matrix>& k0 = std::nullopt,
                               const CareOptions& opts = {}) {
  validate_system(sys);
  validate_cost(sys, cost);
  const Index n = sys.states();
  const Index m = sys.inputs();
  const double tol = opts.tolerance.value_or(care_tol(cost));

  Matrix k;
  if (k0) {
    require_shape(*k0, m, n, "initial gain");
    require_finite(*k0, "initial gain");
    if (!is_hurwitz(sys.a - sys.b * *k0)) {
      throw Error(ErrorCode::NotHurwitz, "initial gain does not stabilize the system");
    }
    k = *k0;
  } else if (is_hurwitz(sys.a)) {
    k = Matrix::Zero(m, n);
  } else {
    auto seed = stabilizing_gain(sys, cost);
    if (!seed) throw Error(ErrorCode::NoStabilizingSeed, "stabilization LMI is infeasible");
    k = std::move(*seed);
  }

  CareSolution sol;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Matrix a_cl = sys.a - sys.b * k;
    const Matrix p = solve_lyapunov(a_cl, symmetric_part(cost.q + k.transpose() * cost.r * k));
    k = r_inverse_times(cost.r, sys.b.transpose() * p);
    const double res = care_residual(sys, cost, p).norm();
    sol.residual_history.push_back(res);
    sol.p_star = p;
    sol.k_star = k;
    sol.residual = res;
    sol.iterations = it;
    if (res <= tol) return sol;
  }
  throw Error(ErrorCode::IterationLimit, "Newton-Kleinman stopped at residual " +
                                             std::to_string(sol.residual));
}

}  // namespace asymlyap
