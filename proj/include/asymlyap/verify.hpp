#pragma once

// Independent checks of a gain: closed-loop construction, the exact cost
// x0^T Z x0 from a Lyapunov equation, an RK4 simulation of the cost
// integral, and the spectrum test for the asymmetric stability inequality.

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "asymlyap/error.hpp"
#include "asymlyap/lyapunov.hpp"
#include "asymlyap/matops.hpp"
#include "asymlyap/system.hpp"

namespace asymlyap {

struct ClosedLoop {
  Matrix k;
  Matrix a_cl;
};

/// K = R^-1 B^T P and A_cl = A - B K.
inline ClosedLoop closed_loop(const LtiSystem& sys, const Matrix& r, const Matrix& p) {
  validate_system(sys);
  require_shape(r, sys.inputs(), sys.inputs(), "R");
  require_shape(p, sys.states(), sys.states(), "P");
  require_finite(p, "P");
  if (!is_positive_definite(r)) throw Error(ErrorCode::RNotPositiveDefinite, "R must be positive definite");
  ClosedLoop out;
  out.k = r_inverse_times(r, sys.b.transpose() * p);
  out.a_cl = sys.a - sys.b * out.k;
  return out;
}

struct CostResult {
  Matrix z;
  double j = 0.0;
};

/// Z from A_cl^T Z + Z A_cl + Q + K^T R K = 0 for an arbitrary gain K.
inline CostResult cost_via_z_gain(const LtiSystem& sys, const QuadraticCost& cost, const Matrix& k,
                                  const Vector& x0) {
  validate_system(sys);
  validate_cost(sys, cost);
  require_shape(k, sys.inputs(), sys.states(), "K");
  require_shape(x0, sys.states(), 1, "x0");
  require_finite(x0, "x0");
  const Matrix a_cl = sys.a - sys.b * k;
  CostResult out;
  out.z = solve_lyapunov(a_cl, symmetric_part(cost.q + k.transpose() * cost.r * k));
  out.j = x0.dot(out.z * x0);
  return out;
}

/// Z from A_cl^T Z + Z A_cl + Q + P^T B R^-1 B^T P = 0 with A_cl = A - B R^-1 B^T P.
inline CostResult cost_via_z(const LtiSystem& sys, const QuadraticCost& cost, const Matrix& p,
                             const Vector& x0) {
  validate_cost(sys, cost);
  const auto loop = closed_loop(sys, cost.r, p);
  return cost_via_z_gain(sys, cost, loop.k, x0);
}

struct SimulationOptions {
  /// Defaults to min(1e-3 / |abscissa|, 0.1 / max |lambda|).
  std::optional<double> step;
  /// Defaults to 40 time constants, 40 / |abscissa|.
  std::optional<double> horizon;
  /// Defaults to 1e-9 * ||x0||.
  std::optional<double> stop_norm;
  bool record_trajectory = false;
  /// Record every n-th step (the first and last are always kept).
  int sample_stride = 1;
};

struct TrajectorySample {
  double t = 0.0;
  Vector x;
  double cost_accum = 0.0;
};

struct SimulationResult {
  /// Integral up to the stopping time plus the tail estimate.
  double j = 0.0;
  double tail_estimate = 0.0;
  double final_time = 0.0;
  double step = 0.0;
  long steps = 0;
  /// False when the state norm never fell below stop_norm; j is then the
  /// truncated integral.
  bool converged = false;
  std::vector<TrajectorySample> trajectory;
};

/// One classical fourth-order Runge-Kutta step of x' = f(x).
template <class Derivative, class State>
State rk4_step(const Derivative& f, const State& x, double h) {
  const State k1 = f(x);
  const State k2 = f(State(x + 0.5 * h * k1));
  const State k3 = f(State(x + 0.5 * h * k2));
  const State k4 = f(State(x + h * k3));
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrates x' = A_cl x and the running cost x^T (Q + K^T R K) x together
/// as one augmented linear system.
inline SimulationResult simulate_cost(const LtiSystem& sys, const QuadraticCost& cost,
                                      const Matrix& k, const Vector& x0,
                                      const SimulationOptions& opts = {}) {
  validate_system(sys);
  validate_cost(sys, cost);
  require_shape(k, sys.inputs(), sys.states(), "K");
  require_shape(x0, sys.states(), 1, "x0");
  require_finite(x0, "x0");
  const Index n = sys.states();
  const Matrix a_cl = sys.a - sys.b * k;
  const Matrix weight = symmetric_part(cost.q + k.transpose() * cost.r * k);

  SimulationResult out;
  const double x0_norm = x0.norm();
  if (x0_norm == 0.0) {
    out.converged = true;
    if (opts.record_trajectory) out.trajectory.push_back({0.0, x0, 0.0});
    return out;
  }

  const Spectrum spec = eig_general(a_cl);
  const double abscissa = spec.max_real();
  const bool hurwitz = abscissa < kHurwitzThreshold;
  double largest = 0.0;
  for (const auto& l : spec.eigenvalues) largest = std::max(largest, std::abs(l));
  const double rate = hurwitz ? std::abs(abscissa) : 1.0;

  double h = opts.step.value_or(std::min(1e-3 / rate, largest > 0.0 ? 0.1 / largest : 1e-3 / rate));
  const double horizon = opts.horizon.value_or(40.0 / rate);
  const double stop_norm = opts.stop_norm.value_or(1e-9 * x0_norm);
  if (!(h > 0.0) || !(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "step and horizon must be positive");
  h = std::min(h, horizon);
  const int stride = std::max(1, opts.sample_stride);

  const auto derivative = [&](const Vector& s) {
    Vector d(n + 1);
    const auto x = s.head(n);
    d.head(n).noalias() = a_cl * x;
    d(n) = x.dot(weight * x);
    return d;
  };

  Vector state(n + 1);
  state.head(n) = x0;
  state(n) = 0.0;
  double t = 0.0;
  if (opts.record_trajectory) out.trajectory.push_back({0.0, x0, 0.0});
  while (t < horizon) {
    const double dt = std::min(h, horizon - t);
    state = rk4_step(derivative, state, dt);
    t += dt;
    ++out.steps;
    if (!state.allFinite()) throw Error(ErrorCode::NonFinite, "simulation diverged");
    const bool done = state.head(n).norm() < stop_norm;
    if (opts.record_trajectory && (out.steps % stride == 0 || done || t >= horizon)) {
      out.trajectory.push_back({t, state.head(n), state(n)});
    }
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.final_time = t;
  out.step = h;
  if (hurwitz) {
    // Remaining cost is at most ||M|| ||x_T||^2 / (2 |abscissa|) for a normal
    // closed loop; used as an estimate otherwise.
    const double xt = state.head(n).squaredNorm();
    out.tail_estimate = weight.norm() * xt / (2.0 * rate);
  }
  out.j = state(n) + out.tail_estimate;
  return out;
}

/// Trajectory as CSV with header t,x1..xn,cost_accum.
inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectorySample>& samples) {
  const Index n = samples.empty() ? 0 : samples.front().x.size();
  os << "t";
  for (Index i = 0; i < n; ++i) os << ",x" << (i + 1);
  os << ",cost_accum\n";
  const auto old_precision = os.precision(12);
  for (const auto& s : samples) {
    os << s.t;
    for (Index i = 0; i < n; ++i) os << ',' << s.x(i);
    os << ',' << s.cost_accum << '\n';
  }
  os.precision(old_precision);
}

struct LsiCheck {
  bool lsi_holds = false;
  /// Largest eigenvalue of a_bar P + P^T a_bar.
  double lsi_max_eig = 0.0;
  Spectrum spectrum;
  bool all_re_positive = false;
};

/// For symmetric negative definite a_bar: does a_bar P + P^T a_bar < 0 hold,
/// and do all eigenvalues of P have positive real part.
inline LsiCheck check_lsi_spectrum(const Matrix& a_bar, const Matrix& p) {
  require_square(a_bar, "a_bar");
  require_finite(a_bar, "a_bar");
  require_shape(p, a_bar.rows(), a_bar.cols(), "P");
  require_finite(p, "P");
  if (symmetry_residual(a_bar) > sym_tol(a_bar)) {
    throw Error(ErrorCode::NotSymmetric, "a_bar is not symmetric");
  }
  if (a_bar.rows() == 0 || !(max_eig_sym(a_bar) < 0.0)) {
    throw Error(ErrorCode::NotNegativeDefinite, "a_bar must be negative definite");
  }
  LsiCheck out;
  const Matrix lhs = symmetric_part(a_bar * p + p.transpose() * a_bar);
  out.lsi_max_eig = max_eig_sym(lhs);
  out.lsi_holds = out.lsi_max_eig < 0.0;
  out.spectrum = eig_general(p);
  out.all_re_positive = out.spectrum.min_real() > 0.0;
  return out;
}

}  // namespace asymlyap
