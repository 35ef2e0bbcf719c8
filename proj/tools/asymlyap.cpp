// asymlyap: suboptimal LQ design with asymmetric design matrices.
//
// Exit codes: 0 success, 2 infeasible or unstable, 3 bound violated,
// 64 parse error, 65 dimension or validation error, 1 anything else.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "asymlyap.hpp"
#include "asymlyap/io.hpp"

namespace {

using namespace asymlyap;
using io::json;

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitBound = 3;
constexpr int kExitParse = 64;
constexpr int kExitInvalid = 65;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError:
      return kExitParse;
    case ErrorCode::InfeasibleLmi:
    case ErrorCode::NoStabilizingSeed:
    case ErrorCode::NotHurwitz:
    case ErrorCode::AsymmetricClosedLoop:
    case ErrorCode::PHatFailed:
      return kExitInfeasible;
    case ErrorCode::NonSquare:
    case ErrorCode::NonFinite:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NotSymmetric:
    case ErrorCode::NotSymmetricRhs:
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::NotNegativeDefinite:
    case ErrorCode::RNotPositiveDefinite:
    case ErrorCode::NonPositiveAlpha:
    case ErrorCode::TooFewAgents:
    case ErrorCode::InvalidArgument:
      return kExitInvalid;
    default:
      return 1;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("asymlyap");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("ASYMLYAP_LOG");
  const std::string level = env ? env : "info";
  if (level == "quiet") {
    spdlog::set_level(spdlog::level::off);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
}

std::string format_matrix(const Matrix& m, const std::string& indent = "  ") {
  std::ostringstream os;
  os << std::setprecision(6);
  for (Index i = 0; i < m.rows(); ++i) {
    os << indent << '[';
    for (Index j = 0; j < m.cols(); ++j) os << (j ? ", " : "") << std::setw(12) << m(i, j);
    os << "]\n";
  }
  return os.str();
}

struct SimFlags {
  std::optional<double> horizon;
  std::optional<double> step;
  bool no_simulate = false;
};

VerifyOptions verify_options(const SimFlags& flags, const io::SolverSettings& file) {
  VerifyOptions opts;
  opts.simulate = !flags.no_simulate;
  opts.simulation.horizon = flags.horizon ? flags.horizon : file.horizon;
  opts.simulation.step = flags.step ? flags.step : file.step;
  return opts;
}

void write_csv(const std::string& path, const std::vector<TrajectorySample>& samples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  write_trajectory_csv(out, samples);
  spdlog::info("trajectory written to {}", path);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// design ---------------------------------------------------------------------

struct DesignArgs {
  std::string problem;
  std::optional<double> epsilon;
  std::optional<double> feas_tol;
  std::optional<double> w_cap;
  SimFlags sim;
  std::string structure;
  std::string out;
  std::string csv;
  bool minimize_trace = false;
};

int run_design(const DesignArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  const auto file = io::load_problem(args.problem);
  if (!file.design) throw Error(ErrorCode::ParseError, "design needs a problem with system and cost sections");
  DesignProblem problem = *file.design;
  if (args.epsilon) problem.tolerances.epsilon = *args.epsilon;
  if (args.feas_tol) problem.tolerances.feas_tol = *args.feas_tol;
  if (!args.structure.empty()) {
    const json doc = json::parse(io::read_file(args.structure), nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::ParseError, "structure file is not valid JSON");
    problem.structure = io::parse_structure(doc.contains("structure") ? doc["structure"] : doc);
  }
  DesignOptions dopts;
  dopts.w_cap = args.w_cap ? args.w_cap : file.solver.w_cap;
  dopts.minimize_trace = args.minimize_trace;

  spdlog::debug("designing for n = {}, m = {}", problem.sys.states(), problem.sys.inputs());
  const auto cert = design_suboptimal(problem, dopts);
  spdlog::info("LMIs feasible, slack {:.3e}, {} Newton steps", cert.diagnostics.solver_slack,
               cert.diagnostics.solver_newton_iterations);

  VerifyOptions vopts = verify_options(args.sim, file.solver);
  vopts.simulation.record_trajectory = !args.csv.empty();
  const auto rep = verify_certificate(problem, cert, vopts);

  std::cout << "P =\n" << format_matrix(cert.p) << "K =\n" << format_matrix(cert.k);
  std::cout << std::setprecision(6) << "gamma_bar   = " << cert.gamma_bar << '\n'
            << "J analytic  = " << rep.j_analytic << '\n';
  if (rep.j_simulated) std::cout << "J simulated = " << *rep.j_simulated << '\n';
  if (rep.j_star) std::cout << "J* (CARE)   = " << *rep.j_star << '\n';

  bool verified = rep.hurwitz && rep.oracles_agree() && (rep.bound_ok || rep.degenerate_x0);
  if (rep.degenerate_x0) std::cout << "x0 = 0: cost and bound are both zero\n";
  if (!verified) spdlog::error("verification failed: bound or oracle check did not hold");
  std::cout << "bound_ok    = " << (rep.bound_ok ? "true" : "false") << '\n';

  if (!args.csv.empty()) {
    const auto sim = simulate_cost(problem.sys, problem.cost, cert.k, problem.x0, [&] {
      auto o = vopts.simulation;
      o.record_trajectory = true;
      return o;
    }());
    write_csv(args.csv, sim.trajectory);
  }
  if (!args.out.empty()) {
    json doc = {{"input", file.source},
                {"certificate", io::to_json(cert)},
                {"verification", io::to_json(rep)},
                {"solver", io::solver_json(cert)},
                {"wall_clock_seconds", seconds_since(start)}};
    io::write_json(args.out, doc);
    spdlog::info("report written to {}", args.out);
  }
  return verified ? kExitOk : kExitBound;
}

// riccati --------------------------------------------------------------------

int run_riccati(const std::string& path, const std::string& out_path) {
  const auto start = std::chrono::steady_clock::now();
  const auto file = io::load_problem(path);
  if (!file.design) throw Error(ErrorCode::ParseError, "riccati needs a problem with system and cost sections");
  const auto& problem = *file.design;
  validate_problem(problem);
  const auto care = solve_care(problem.sys, problem.cost);
  const double j_star = care.j_star_of(problem.x0);
  std::cout << "P* =\n" << format_matrix(care.p_star) << "K* =\n" << format_matrix(care.k_star)
            << std::setprecision(6) << "J*(x0)        = " << j_star << '\n'
            << "CARE residual = " << care.residual << " after " << care.iterations << " iterations\n";
  if (!out_path.empty()) {
    json doc = {{"input", file.source},
                {"riccati",
                 {{"P_star", io::to_json(care.p_star)},
                  {"K_star", io::to_json(care.k_star)},
                  {"j_star", j_star},
                  {"residual", care.residual},
                  {"iterations", care.iterations},
                  {"residual_history", care.residual_history}}},
                {"wall_clock_seconds", seconds_since(start)}};
    io::write_json(out_path, doc);
  }
  return kExitOk;
}

// verify ---------------------------------------------------------------------

struct VerifyArgs {
  std::string problem;
  std::string gain;
  std::optional<double> gamma;
  SimFlags sim;
  std::string out;
  std::string csv;
};

int run_verify(const VerifyArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  const auto file = io::load_problem(args.problem);
  if (!file.design) throw Error(ErrorCode::ParseError, "verify needs a problem with system and cost sections");
  const auto& problem = *file.design;
  validate_problem(problem);
  const auto gain = io::parse_gain(io::read_file(args.gain));
  const VerifyOptions vopts = verify_options(args.sim, file.solver);

  VerificationReport rep = gain.p ? verify_design_matrix(problem.sys, problem.cost, *gain.p, problem.x0, args.gamma, vopts)
                                  : verify_gain(problem.sys, problem.cost, *gain.k, problem.x0, args.gamma, vopts);
  std::cout << "K =\n" << format_matrix(rep.k) << std::setprecision(6)
            << "spectral abscissa = " << rep.spectral_abscissa << '\n';
  if (!rep.hurwitz) {
    spdlog::error("closed loop is not Hurwitz (spectral abscissa {})", rep.spectral_abscissa);
    return kExitInfeasible;
  }
  std::cout << "J analytic  = " << rep.j_analytic << '\n';
  if (rep.j_simulated) std::cout << "J simulated = " << *rep.j_simulated << '\n';
  if (rep.j_star) std::cout << "J* (CARE)   = " << *rep.j_star << '\n';

  json extra = json::object();
  if (args.gamma && gain.p && is_symmetric(*gain.p) && is_positive_definite(*gain.p)) {
    const auto check = check_gamma_suboptimal(*gain.p, *args.gamma, problem);
    std::cout << "gamma-suboptimal (symmetric P test): " << (check.suboptimal ? "yes" : "no") << '\n';
    extra = {{"suboptimal", check.suboptimal},
             {"riccati_max_eig", check.riccati_max_eig},
             {"x0_cost", check.x0_cost}};
  }
  if (args.gamma) std::cout << "bound_ok    = " << (rep.bound_ok ? "true" : "false") << '\n';

  if (!args.csv.empty()) {
    auto o = vopts.simulation;
    o.record_trajectory = true;
    write_csv(args.csv, simulate_cost(problem.sys, problem.cost, rep.k, problem.x0, o).trajectory);
  }
  if (!args.out.empty()) {
    json doc = {{"input", file.source},
                {"gain_input", gain.source},
                {"verification", io::to_json(rep)},
                {"gamma_check", extra},
                {"wall_clock_seconds", seconds_since(start)}};
    io::write_json(args.out, doc);
  }
  if (!rep.oracles_agree()) {
    spdlog::error("simulated and analytic cost disagree");
    return kExitBound;
  }
  return (args.gamma && !rep.bound_ok && !rep.degenerate_x0) ? kExitBound : kExitOk;
}

// consensus ------------------------------------------------------------------

struct ConsensusArgs {
  std::string file;
  std::optional<int> agents;
  std::optional<double> pole;
  std::optional<double> q;
  std::optional<double> r;
  std::vector<double> states;
  std::optional<double> w_cap;
  SimFlags sim;
  std::string out;
  std::string csv;
};

int run_consensus(const ConsensusArgs& args) {
  const auto start = std::chrono::steady_clock::now();
  ConsensusProblem problem{4, 1.0, 10.0, 0.01, Vector()};
  std::string source;
  io::SolverSettings settings;
  if (!args.file.empty()) {
    const auto file = io::load_problem(args.file);
    if (!file.consensus) throw Error(ErrorCode::ParseError, "file has no consensus section");
    problem = *file.consensus;
    source = file.source;
    settings = file.solver;
  }
  if (args.agents) problem.n_agents = *args.agents;
  if (args.pole) problem.agent_pole = *args.pole;
  if (args.q) problem.q_weight = *args.q;
  if (args.r) problem.r_weight = *args.r;
  if (!args.states.empty()) {
    problem.initial_states = Eigen::Map<const Vector>(args.states.data(), static_cast<Index>(args.states.size()));
  }
  if (problem.n_agents < 2) {
    throw Error(ErrorCode::TooFewAgents, "need at least two agents, got " + std::to_string(problem.n_agents));
  }
  if (problem.initial_states.size() == 0) problem.initial_states = Vector::LinSpaced(problem.n_agents, 1.0, 0.0);

  DesignOptions dopts;
  dopts.w_cap = args.w_cap ? args.w_cap : settings.w_cap;
  const auto protocol = design_consensus(problem, dopts);
  const double tau = protocol.consensus_time / std::log(1e3);
  const double horizon = args.sim.horizon.value_or(settings.horizon.value_or(40.0 * tau));
  const double step = args.sim.step.value_or(settings.step.value_or(1e-3 * tau));
  const auto agents = simulate_agents(problem, protocol.k, horizon, step, std::max(1, static_cast<int>(1e-2 * tau / step)));
  const double disagreement = max_disagreement(agents.trajectory.back().x);

  const bool degenerate = protocol.error_problem.x0.squaredNorm() == 0.0;
  const bool bound_ok = protocol.j_realized < protocol.gamma_bar;
  std::cout << "u = -K e with K =\n" << format_matrix(protocol.k) << std::setprecision(6)
            << "structure_ok     = " << (protocol.structure_ok ? "true" : "false") << '\n'
            << "gamma_bar        = " << protocol.gamma_bar << '\n'
            << "J realized       = " << protocol.j_realized << '\n'
            << "J simulated      = " << protocol.j_simulated << '\n'
            << "consensus time   = " << protocol.consensus_time << " (errors shrink by 1e3)\n"
            << "disagreement(T)  = " << disagreement << " at T = " << horizon << '\n';

  if (!args.csv.empty()) write_csv(args.csv, agents.trajectory);
  if (!args.out.empty()) {
    json doc = {{"input", source.empty() ? json(nullptr) : json(source)},
                {"consensus",
                 {{"n_agents", problem.n_agents},
                  {"agent_pole", problem.agent_pole},
                  {"q_weight", problem.q_weight},
                  {"r_weight", problem.r_weight},
                  {"initial_states", io::to_json(problem.initial_states)}}},
                {"protocol",
                 {{"K", io::to_json(protocol.k)},
                  {"structure_ok", protocol.structure_ok},
                  {"gamma_bar", protocol.gamma_bar},
                  {"j_realized", protocol.j_realized},
                  {"j_simulated", protocol.j_simulated},
                  {"consensus_time", protocol.consensus_time},
                  {"disagreement_at_horizon", disagreement},
                  {"bound_ok", bound_ok}}},
                {"certificate", io::to_json(protocol.certificate)},
                {"solver", io::solver_json(protocol.certificate)},
                {"wall_clock_seconds", seconds_since(start)}};
    io::write_json(args.out, doc);
  }
  return (bound_ok || degenerate) ? kExitOk : kExitBound;
}

void add_sim_flags(CLI::App* cmd, SimFlags& flags) {
  cmd->add_option("--horizon", flags.horizon, "Simulation horizon in seconds");
  cmd->add_option("--step", flags.step, "RK4 step size");
  cmd->add_flag("--no-simulate", flags.no_simulate, "Skip the simulated cost oracle");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Suboptimal LQ design with asymmetric Lyapunov-like inequalities"};
  app.require_subcommand(1);

  DesignArgs design;
  auto* design_cmd = app.add_subcommand("design", "Solve the design LMIs and certify a cost bound");
  design_cmd->add_option("problem", design.problem, "Problem file (JSON)")->required()->check(CLI::ExistingFile);
  design_cmd->add_option("--epsilon", design.epsilon, "Strictness parameter for the LMIs");
  design_cmd->add_option("--feas-tol", design.feas_tol, "Feasibility tolerance");
  design_cmd->add_option("--w-cap", design.w_cap, "Upper bound on W");
  add_sim_flags(design_cmd, design.sim);
  design_cmd->add_option("--structure", design.structure, "Structure file (JSON)")->check(CLI::ExistingFile);
  design_cmd->add_option("--out", design.out, "Report path");
  design_cmd->add_option("--csv", design.csv, "Trajectory CSV path");
  design_cmd->add_flag("--minimize-trace", design.minimize_trace, "Experimental: reduce trace(P - P_lower)");

  std::string riccati_problem;
  std::string riccati_out;
  auto* riccati_cmd = app.add_subcommand("riccati", "Optimal LQ baseline from the Riccati equation");
  riccati_cmd->add_option("problem", riccati_problem, "Problem file (JSON)")->required()->check(CLI::ExistingFile);
  riccati_cmd->add_option("--out", riccati_out, "Report path");

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify", "Check a given design matrix P or gain K");
  verify_cmd->add_option("problem", verify.problem, "Problem file (JSON)")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("gain", verify.gain, "File with \"P\" or \"K\" (JSON)")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--gamma", verify.gamma, "Cost bound to test");
  add_sim_flags(verify_cmd, verify.sim);
  verify_cmd->add_option("--out", verify.out, "Report path");
  verify_cmd->add_option("--csv", verify.csv, "Trajectory CSV path");

  ConsensusArgs consensus;
  auto* consensus_cmd = app.add_subcommand("consensus", "Design a consensus protocol on a path graph");
  consensus_cmd->add_option("file", consensus.file, "Consensus problem file (JSON)")->check(CLI::ExistingFile);
  consensus_cmd->add_option("--agents", consensus.agents, "Number of agents");
  consensus_cmd->add_option("--pole", consensus.pole, "Agent dynamics x' = a x + u");
  consensus_cmd->add_option("--q", consensus.q, "Weight on squared errors");
  consensus_cmd->add_option("--r", consensus.r, "Weight on squared inputs");
  consensus_cmd->add_option("--states", consensus.states, "Initial agent states");
  consensus_cmd->add_option("--w-cap", consensus.w_cap, "Upper bound on W");
  add_sim_flags(consensus_cmd, consensus.sim);
  consensus_cmd->add_option("--out", consensus.out, "Report path");
  consensus_cmd->add_option("--csv", consensus.csv, "Agent trajectory CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitParse;
  }

  try {
    if (*design_cmd) return run_design(design);
    if (*riccati_cmd) return run_riccati(riccati_problem, riccati_out);
    if (*verify_cmd) return run_verify(verify);
    if (*consensus_cmd) return run_consensus(consensus);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
