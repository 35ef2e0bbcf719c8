#pragma once

// Suboptimal LQ design with a not necessarily symmetric design matrix.
//
// Finds X > 0, Y, W > 0 and P_lower satisfying the stabilization LMI, the
// 3x3 block suboptimality LMI and the realness equality, recovers
// P = Y X^-1, K = R^-1 B^T P, solves A_cl P_hat + P_hat^T A_cl + W = 0 and
// reports the cost bound trace(P - P_lower + P_hat) * x0^T x0.

#include <algorithm>
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
#include "asymlyap/verify.hpp"

namespace asymlyap {

struct DesignTolerances {
  /// Strictness: definite constraints hold with margin epsilon * (1 + ||A||_F).
  double epsilon = kDefaultEpsilon;
  double feas_tol = 1e-7;
};

struct DesignProblem {
  LtiSystem sys;
  QuadraticCost cost;
  Vector x0;
  /// Without a structure, Y is free and X is scalar.
  std::optional<StructureSpec> structure;
  DesignTolerances tolerances;
};

struct DesignOptions {
  /// W <= w_cap I; defaults to 1e3 * ||Q||_F (1e3 when Q = 0).
  std::optional<double> w_cap;
  /// Radius for the solver's variable ball; defaults to
  /// 100 * (1 + ||A||_F + ||B||_F + ||Q||_F + ||R||_F).
  std::optional<double> variable_bound;
  /// Experimental: after a feasible point is found, move along the
  /// linearization of trace(P - P_lower) and keep the point with the
  /// smallest certified bound.
  bool minimize_trace = false;
  /// Solver override; the barrier backend when null.
  const FeasibilityBackend* backend = nullptr;
};

struct DesignDiagnostics {
  double closed_loop_symmetry_residual = 0.0;
  std::vector<ConstraintMargin> margins;
  Spectrum p_spectrum;
  double solver_slack = 0.0;
  int solver_outer_iterations = 0;
  int solver_newton_iterations = 0;
  double w_cap = 0.0;
  double variable_bound = 0.0;
};

struct DesignCertificate {
  Matrix x;
  Matrix y;
  Matrix w;
  Matrix p_lower;
  Matrix p;
  Matrix k;
  Matrix a_cl;
  Matrix p_hat;
  /// trace(P - P_lower + P_hat); the bound per unit x0^T x0.
  double trace_term = 0.0;
  double gamma_bar = 0.0;
  DesignDiagnostics diagnostics;
};

inline void validate_problem(const DesignProblem& problem) {
  validate_system(problem.sys);
  validate_cost(problem.sys, problem.cost);
  require_shape(problem.x0, problem.sys.states(), 1, "x0");
  require_finite(problem.x0, "x0");
  if (problem.structure) problem.structure->validate(problem.sys.states());
  if (!(problem.tolerances.epsilon >= 0.0) || !(problem.tolerances.feas_tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "tolerances must be non-negative");
  }
}

inline double default_w_cap(const QuadraticCost& cost) {
  const double q = cost.q.norm();
  return 1e3 * (q > 0.0 ? q : 1.0);
}

inline double default_variable_bound(const LtiSystem& sys, const QuadraticCost& cost) {
  return 100.0 * (1.0 + sys.a.norm() + sys.b.norm() + cost.q.norm() + cost.r.norm());
}

inline StructureSpec effective_structure(const DesignProblem& problem) {
  return problem.structure.value_or(StructureSpec::unstructured(problem.sys.states(), true));
}

/// Every constraint of the design problem over VariableLayout::for_design(n).
inline std::vector<AffineMatrixConstraint> design_constraints(const DesignProblem& problem,
                                                              const VariableLayout& layout,
                                                              double w_cap) {
  const auto& sys = problem.sys;
  const Index n = sys.states();
  const double eps = problem.tolerances.epsilon;
  const double margin = strictness_margin(sys, eps);
  std::vector<AffineMatrixConstraint> out{
      build_stability_lmi(sys, problem.cost, layout, eps),
      build_suboptimality_lmi(sys, problem.cost, layout, eps),
      build_realness_constraint(sys, problem.cost, layout),
      AffineMatrixConstraint::from_expr("X positive", layout.expr("X"),
                                        ConstraintSense::PositiveDefinite, margin),
      AffineMatrixConstraint::from_expr("W positive", layout.expr("W"),
                                        ConstraintSense::PositiveDefinite, margin),
      AffineMatrixConstraint::from_expr(
          "W cap", layout.expr("W") - AffineExpr::constant(w_cap * Matrix::Identity(n, n)),
          ConstraintSense::NegativeDefinite, 0.0),
  };
  for (auto& c : apply_structure(layout, effective_structure(problem))) out.push_back(std::move(c));
  return out;
}

namespace detail {

/// Certificate for a feasible assignment of the design variables.
inline DesignCertificate certify(const DesignProblem& problem, const VariableLayout& layout,
                                 const FeasibilityResult& result, double w_cap, double variable_bound) {
  const Vector& v = *result.assignment;
  DesignCertificate cert;
  cert.x = layout.extract("X", v);
  cert.y = layout.extract("Y", v);
  cert.w = layout.extract("W", v);
  cert.p_lower = layout.extract("P_lower", v);
  // P X = Y with X symmetric, so P^T = X^-1 Y^T.
  cert.p = solve_linear(cert.x, cert.y.transpose()).transpose();
  const auto loop = closed_loop(problem.sys, problem.cost.r, cert.p);
  cert.k = loop.k;
  cert.a_cl = loop.a_cl;

  auto& diag = cert.diagnostics;
  diag.closed_loop_symmetry_residual = symmetry_residual(cert.a_cl);
  diag.margins = result.margins;
  diag.solver_slack = result.slack;
  diag.solver_outer_iterations = result.outer_iterations;
  diag.solver_newton_iterations = result.newton_iterations;
  diag.w_cap = w_cap;
  diag.variable_bound = variable_bound;
  diag.p_spectrum = eig_general(cert.p);

  if (diag.closed_loop_symmetry_residual > sym_tol(cert.a_cl)) {
    throw Error(ErrorCode::AsymmetricClosedLoop,
                "closed-loop asymmetry " + std::to_string(diag.closed_loop_symmetry_residual));
  }
  try {
    cert.p_hat = solve_p_hat(cert.a_cl, cert.w);
  } catch (const Error& e) {
    throw Error(ErrorCode::PHatFailed, e.what());
  }
  const double residual = p_hat_residual(cert.a_cl, cert.p_hat, cert.w).norm();
  if (!(residual <= lyap_tol(cert.w))) {
    throw Error(ErrorCode::PHatFailed, "P_hat residual " + std::to_string(residual) + " above tolerance");
  }
  cert.trace_term = (cert.p - cert.p_lower + cert.p_hat).trace();
  cert.gamma_bar = cert.trace_term * problem.x0.squaredNorm();
  return cert;
}

}  // namespace detail

inline DesignCertificate design_suboptimal(const DesignProblem& problem, const DesignOptions& opts = {}) {
  validate_problem(problem);
  const auto& sys = problem.sys;
  const auto& cost = problem.cost;
  const Index n = sys.states();

  const double w_cap = opts.w_cap.value_or(default_w_cap(cost));
  if (!(w_cap > 0.0)) throw Error(ErrorCode::InvalidArgument, "w_cap must be positive");
  const VariableLayout layout = VariableLayout::for_design(n);
  const auto constraints = design_constraints(problem, layout, w_cap);

  FeasibilityOptions fopts;
  fopts.feas_tol = problem.tolerances.feas_tol;
  fopts.variable_bound = opts.variable_bound.value_or(default_variable_bound(sys, cost));
  const BarrierBackend barrier;
  const FeasibilityBackend& backend = opts.backend ? *opts.backend : barrier;

  const FeasibilityResult result = backend.solve(constraints, layout, fopts);
  if (!result.feasible()) {
    throw Error(ErrorCode::InfeasibleLmi, std::string(to_string(result.status)) + ": " + result.message);
  }
  DesignCertificate best = detail::certify(problem, layout, result, w_cap, fopts.variable_bound);
  if (!opts.minimize_trace) return best;

  // Sequential linearization of trace(P - P_lower + P_hat) in (X, Y, W, P_lower).
  // With A_cl symmetric, G and P_hat from A_cl G + G A_cl + I = 0 and the
  // P_hat equation, d trace(P_hat) = <G, dW> + <H, dA_cl> with H = P_hat G + G P_hat,
  // and dA_cl = -S dP, dP = dY X^-1 - P dX X^-1. Each round solves the linear
  // program to several depths and searches the segment back to the current
  // point, which is feasible throughout by convexity.
  const Matrix s = input_weight(sys, cost);
  for (int round = 0; round < 4; ++round) {
    const double before = best.trace_term;
    const Matrix x_inv = solve_linear(best.x, Matrix::Identity(n, n));
    const Matrix g = solve_lyapunov(symmetric_part(best.a_cl), Matrix::Identity(n, n));
    const Matrix h = best.p_hat * g + g * best.p_hat;
    const Matrix c = Matrix::Identity(n, n) - s * h;
    const Matrix grad_y = c * x_inv;
    const Matrix grad_x = -best.p.transpose() * c * x_inv;
    Vector objective = Vector::Zero(layout.dimension());
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        objective(layout.index("Y", i, j)) += grad_y(i, j);
        objective(layout.index("X", i, j)) += grad_x(i, j);
        objective(layout.index("W", i, j)) += g(i, j);
      }
      objective(layout.index("P_lower", i, i)) -= 1.0;
    }
    Vector current;
    layout.assign("X", best.x, current);
    layout.assign("Y", best.y, current);
    layout.assign("W", best.w, current);
    layout.assign("P_lower", best.p_lower, current);

    fopts.objective = objective;
    for (const double gap : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
      fopts.objective_gap_tol = gap;
      const FeasibilityResult refined = backend.solve(constraints, layout, fopts);
      if (!refined.feasible()) continue;
      for (const double theta : {1.0, 0.5, 0.25, 0.1, 0.03, 0.01}) {
        FeasibilityResult point = refined;
        const Vector v = current + theta * (*refined.assignment - current);
        point.margins = evaluate_margins(constraints, v, fopts.feas_tol);
        if (!std::all_of(point.margins.begin(), point.margins.end(), [](const auto& m) { return m.ok; })) continue;
        point.assignment = v;
        try {
          DesignCertificate candidate = detail::certify(problem, layout, point, w_cap, fopts.variable_bound);
          // The LMIs alone do not keep the spectrum of P in the right half plane
          // for stable plants; the certificate promises it, so stay there.
          const bool spectrum_ok = candidate.diagnostics.p_spectrum.min_real() > 0.0 && candidate.p.trace() > 0.0;
          if (spectrum_ok && candidate.trace_term < best.trace_term) best = std::move(candidate);
        } catch (const Error&) {
          // Too close to the boundary to certify.
        }
      }
    }
    if (!(best.trace_term < (1.0 - 1e-3) * before)) break;
  }
  return best;
}

/// Bound valid for every x0 with x0^T x0 <= alpha.
inline double gamma_for_ball(const DesignCertificate& cert, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::NonPositiveAlpha, "alpha must be positive");
  return alpha * cert.trace_term;
}

struct GammaCheck {
  bool suboptimal = false;
  /// Largest eigenvalue of A^T P + P A - P S P + Q.
  double riccati_max_eig = 0.0;
  double required_margin = 0.0;
  double x0_cost = 0.0;
};

/// Classical test with a symmetric P > 0: A^T P + P A - P B R^-1 B^T P + Q < 0
/// and x0^T P x0 < gamma.
inline GammaCheck check_gamma_suboptimal(const Matrix& p, double gamma, const DesignProblem& problem) {
  validate_problem(problem);
  const Index n = problem.sys.states();
  require_shape(p, n, n, "P");
  require_finite(p, "P");
  if (symmetry_residual(p) > sym_tol(p)) throw Error(ErrorCode::NotSymmetric, "P is not symmetric");
  if (!is_positive_definite(p)) throw Error(ErrorCode::NotPositiveDefinite, "P must be positive definite");
  if (!(gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
  const Matrix ps = symmetric_part(p);
  const Matrix s = input_weight(problem.sys, problem.cost);
  const Matrix lhs =
      problem.sys.a.transpose() * ps + ps * problem.sys.a - ps * s * ps + problem.cost.q;
  GammaCheck out;
  out.riccati_max_eig = max_eig_sym(symmetric_part(lhs));
  out.required_margin = strictness_margin(problem.sys, problem.tolerances.epsilon);
  out.x0_cost = problem.x0.dot(ps * problem.x0);
  out.suboptimal = out.riccati_max_eig < -out.required_margin && out.x0_cost < gamma;
  return out;
}

}  // namespace asymlyap
