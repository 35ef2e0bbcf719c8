#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "asymlyap/design.hpp"
#include "asymlyap/matops.hpp"
#include "asymlyap/riccati.hpp"
#include "asymlyap/system.hpp"
#include "asymlyap/verify.hpp"

namespace asymlyap {

struct VerificationReport {
  bool hurwitz = false;
  double spectral_abscissa = 0.0;
  double closed_loop_symmetry_residual = 0.0;
  Matrix k;
  Matrix z;
  double j_analytic = std::numeric_limits<double>::infinity();
  std::optional<double> j_simulated;
  bool simulation_converged = false;
  std::optional<double> j_star;
  std::optional<double> care_residual;
  std::optional<double> gamma_bar;
  /// j_analytic < gamma_bar; false when no bound is present.
  bool bound_ok = false;
  /// x0 = 0: cost and bound are both zero, the strict ordering cannot hold.
  bool degenerate_x0 = false;
  /// Present when the report was built from a design matrix P.
  std::optional<Spectrum> p_spectrum;

  /// |j_simulated - j_analytic| <= 1% of j_analytic (true when not simulated).
  [[nodiscard]] bool oracles_agree() const {
    if (!j_simulated) return true;
    return std::abs(*j_simulated - j_analytic) <= 0.01 * std::max(j_analytic, 1e-12);
  }
};

struct VerifyOptions {
  bool simulate = true;
  SimulationOptions simulation;
  /// Also solve the CARE for the optimal cost J*.
  bool baseline = true;
};

/// Checks an arbitrary gain K. An unstable closed loop is reported with
/// hurwitz = false and an infinite cost rather than thrown.
inline VerificationReport verify_gain(const LtiSystem& sys, const QuadraticCost& cost, const Matrix& k,
                                      const Vector& x0, std::optional<double> gamma_bar = std::nullopt,
                                      const VerifyOptions& opts = {}) {
  validate_system(sys);
  validate_cost(sys, cost);
  require_shape(k, sys.inputs(), sys.states(), "K");
  require_shape(x0, sys.states(), 1, "x0");
  VerificationReport rep;
  rep.k = k;
  const Matrix a_cl = sys.a - sys.b * k;
  rep.spectral_abscissa = spectral_abscissa(a_cl);
  rep.hurwitz = rep.spectral_abscissa < kHurwitzThreshold;
  rep.closed_loop_symmetry_residual = symmetry_residual(a_cl);
  rep.gamma_bar = gamma_bar;
  rep.degenerate_x0 = x0.squaredNorm() == 0.0;
  if (!rep.hurwitz) return rep;

  const auto exact = cost_via_z_gain(sys, cost, k, x0);
  rep.z = exact.z;
  rep.j_analytic = exact.j;
  if (opts.simulate) {
    const auto sim = simulate_cost(sys, cost, k, x0, opts.simulation);
    rep.j_simulated = sim.j;
    rep.simulation_converged = sim.converged;
  }
  if (opts.baseline) {
    try {
      const auto care = solve_care(sys, cost, k);
      rep.j_star = care.j_star_of(x0);
      rep.care_residual = care.residual;
    } catch (const Error&) {
      rep.j_star.reset();
    }
  }
  if (gamma_bar) rep.bound_ok = rep.j_analytic < *gamma_bar;
  return rep;
}

/// Checks the law u = -R^-1 B^T P x for a design matrix P.
inline VerificationReport verify_design_matrix(const LtiSystem& sys, const QuadraticCost& cost,
                                               const Matrix& p, const Vector& x0,
                                               std::optional<double> gamma_bar = std::nullopt,
                                               const VerifyOptions& opts = {}) {
  const auto loop = closed_loop(sys, cost.r, p);
  auto rep = verify_gain(sys, cost, loop.k, x0, gamma_bar, opts);
  rep.p_spectrum = eig_general(p);
  return rep;
}

inline VerificationReport verify_certificate(const DesignProblem& problem, const DesignCertificate& cert,
                                             const VerifyOptions& opts = {}) {
  return verify_design_matrix(problem.sys, problem.cost, cert.p, problem.x0, cert.gamma_bar, opts);
}

}  // namespace asymlyap
