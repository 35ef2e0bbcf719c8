#pragma once

// Consensus protocol design for N scalar agents x_i' = a x_i + u_i on a path
// graph. The errors e_i = x_i - x_{i+1} obey e' = a e + D u with D the signed
// difference matrix, and agreement is regulation of e to zero. The gain
// u = -K e must respect the chain: agent 1 sees e_1 and e_2 with one shared
// weight, agent i in the middle sees e_{i-1} and e_i, the last agent sees
// only e_{N-1}.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asymlyap/design.hpp"
#include "asymlyap/error.hpp"
#include "asymlyap/lmi.hpp"
#include "asymlyap/matops.hpp"
#include "asymlyap/verify.hpp"

namespace asymlyap {

struct ConsensusProblem {
  int n_agents = 0;
  double agent_pole = 0.0;
  double q_weight = 1.0;
  double r_weight = 1.0;
  Vector initial_states;
};

inline void validate_consensus(const ConsensusProblem& problem) {
  if (problem.n_agents < 2) {
    throw Error(ErrorCode::TooFewAgents, "need at least two agents, got " + std::to_string(problem.n_agents));
  }
  if (!std::isfinite(problem.agent_pole)) throw Error(ErrorCode::NonFinite, "agent pole is not finite");
  if (!(problem.q_weight > 0.0) || !(problem.r_weight > 0.0) || !std::isfinite(problem.q_weight) ||
      !std::isfinite(problem.r_weight)) {
    throw Error(ErrorCode::InvalidArgument, "q_weight and r_weight must be positive");
  }
  require_shape(problem.initial_states, problem.n_agents, 1, "initial states");
  require_finite(problem.initial_states, "initial states");
}

/// (N-1) x N matrix with +1 at (i, i) and -1 at (i, i+1).
inline Matrix difference_matrix(int n_agents) {
  const Index m = n_agents - 1;
  Matrix d = Matrix::Zero(m, n_agents);
  for (Index i = 0; i < m; ++i) {
    d(i, i) = 1.0;
    d(i, i + 1) = -1.0;
  }
  return d;
}

/// Y pattern whose image under K = R^-1 D^T Y / xi respects the chain:
/// first row free at columns 1 and 2 (tied), remaining rows diagonal only.
inline StructureSpec chain_structure(Index errors) {
  StructureSpec spec;
  spec.y_mask = Mask::Constant(errors, errors, false);
  for (Index i = 0; i < errors; ++i) spec.y_mask(i, i) = true;
  if (errors >= 2) {
    spec.y_mask(0, 1) = true;
    spec.y_ties.push_back({0, 0, 0, 1});
  }
  spec.x_scalar = true;
  return spec;
}

inline DesignProblem build_error_system(const ConsensusProblem& problem) {
  validate_consensus(problem);
  const Index m = problem.n_agents - 1;
  DesignProblem out;
  out.sys.a = problem.agent_pole * Matrix::Identity(m, m);
  out.sys.b = difference_matrix(problem.n_agents);
  out.cost.q = problem.q_weight * Matrix::Identity(m, m);
  out.cost.r = problem.r_weight * Matrix::Identity(problem.n_agents, problem.n_agents);
  out.x0 = out.sys.b * problem.initial_states;
  out.structure = chain_structure(m);
  return out;
}

/// Agent-by-error pattern of admissible gain entries.
inline Mask chain_gain_pattern(int n_agents) {
  const Index m = n_agents - 1;
  Mask allowed = Mask::Constant(n_agents, m, false);
  for (Index agent = 0; agent < n_agents; ++agent) {
    if (agent - 1 >= 0) allowed(agent, agent - 1) = true;
    if (agent < m) allowed(agent, agent) = true;
  }
  if (m >= 2) allowed(0, 1) = true;
  return allowed;
}

/// Exact zeros outside the chain pattern and equal weights for agent 1.
inline bool respects_chain(const Matrix& k) {
  const int n_agents = static_cast<int>(k.rows());
  if (n_agents < 2 || k.cols() != n_agents - 1) return false;
  const Mask allowed = chain_gain_pattern(n_agents);
  for (Index i = 0; i < k.rows(); ++i) {
    for (Index j = 0; j < k.cols(); ++j) {
      if (!allowed(i, j) && k(i, j) != 0.0) return false;
    }
  }
  return k.cols() < 2 || k(0, 0) == k(0, 1);
}

/// The N-agent loop as an LTI system: x' = a x + u, u = -(K D) x, with the
/// agent-side cost q sum e_i^2 + r sum u_i^2 written as x^T D^T Q D x + u^T R u.
struct AgentLoop {
  LtiSystem sys;
  QuadraticCost cost;
  Matrix gain;
};

inline AgentLoop agent_loop(const ConsensusProblem& problem, const Matrix& k) {
  validate_consensus(problem);
  require_shape(k, problem.n_agents, problem.n_agents - 1, "protocol gain");
  const Index n = problem.n_agents;
  const Matrix d = difference_matrix(problem.n_agents);
  AgentLoop out;
  out.sys.a = problem.agent_pole * Matrix::Identity(n, n);
  out.sys.b = Matrix::Identity(n, n);
  out.cost.q = problem.q_weight * d.transpose() * d;
  out.cost.r = problem.r_weight * Matrix::Identity(n, n);
  out.gain = k * d;
  return out;
}

/// Agent states and accumulated agent-side cost over a fixed horizon. The
/// common mode of the agents does not decay when a >= 0, so the run never
/// stops early.
inline SimulationResult simulate_agents(const ConsensusProblem& problem, const Matrix& k, double horizon,
                                        double step, int stride = 1) {
  const auto loop = agent_loop(problem, k);
  SimulationOptions opts;
  opts.horizon = horizon;
  opts.step = step;
  opts.stop_norm = 0.0;
  opts.record_trajectory = true;
  opts.sample_stride = stride;
  return simulate_cost(loop.sys, loop.cost, loop.gain, problem.initial_states, opts);
}

inline double max_disagreement(const Vector& x) { return x.size() == 0 ? 0.0 : x.maxCoeff() - x.minCoeff(); }

struct ConsensusProtocol {
  /// u = -k e, one row per agent.
  Matrix k;
  bool structure_ok = false;
  double gamma_bar = 0.0;
  double j_realized = 0.0;
  double j_simulated = 0.0;
  /// Time for the slowest error mode to shrink by 1e-3.
  double consensus_time = 0.0;
  DesignProblem error_problem;
  DesignCertificate certificate;
};

inline ConsensusProtocol design_consensus(const ConsensusProblem& problem, const DesignOptions& opts = {}) {
  ConsensusProtocol out;
  out.error_problem = build_error_system(problem);
  out.certificate = design_suboptimal(out.error_problem, opts);
  out.k = out.certificate.k;
  out.structure_ok = respects_chain(out.k);
  if (!out.structure_ok) throw Error(ErrorCode::StructureViolated, "gain does not respect the chain topology");
  out.gamma_bar = out.certificate.gamma_bar;
  const auto& ep = out.error_problem;
  out.j_realized = cost_via_z_gain(ep.sys, ep.cost, out.k, ep.x0).j;
  out.j_simulated = simulate_cost(ep.sys, ep.cost, out.k, ep.x0).j;
  const double abscissa = spectral_abscissa(out.certificate.a_cl);
  out.consensus_time = std::log(1e3) / std::abs(abscissa);
  return out;
}

}  // namespace asymlyap
