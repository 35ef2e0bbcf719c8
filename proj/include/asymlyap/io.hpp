#pragma once

// JSON problem and report files. Matrices are nested row arrays.
//
//   {
//     "system": {"A": [[1, 2], [0, 2]], "B": [[4, 2], [0, 2]]},
//     "cost":   {"Q": [[10, 0], [0, 10]], "R": [[0.05, 0], [0, 0.05]]},
//     "x0": [0.1, -0.2],
//     "structure": {"y_mask": [[1, 1], [0, 1]], "x_scalar": true, "y_ties": [[1, 1, 1, 2]]},
//     "solver": {"epsilon": 1e-6, "feas_tol": 1e-7, "w_cap": 100, "horizon": 20, "step": 1e-3}
//   }
//
// A consensus file has a "consensus" object with n_agents, agent_pole,
// q_weight, r_weight and initial_states instead. Structure indices in ties
// are 1-based.

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asymlyap/consensus.hpp"
#include "asymlyap/design.hpp"
#include "asymlyap/error.hpp"
#include "asymlyap/lmi.hpp"
#include "asymlyap/matops.hpp"
#include "asymlyap/report.hpp"
#include "asymlyap/sdpsolve.hpp"

namespace asymlyap::io {

using json = nlohmann::json;

struct SolverSettings {
  std::optional<double> epsilon;
  std::optional<double> feas_tol;
  std::optional<double> w_cap;
  std::optional<double> horizon;
  std::optional<double> step;
};

struct ProblemFile {
  std::optional<DesignProblem> design;
  std::optional<ConsensusProblem> consensus;
  SolverSettings solver;
  /// The input bytes, unchanged.
  std::string source;
};

/// A P (design matrix) or K (gain) to verify.
struct GainFile {
  std::optional<Matrix> p;
  std::optional<Matrix> k;
  std::string source;
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

inline double number(const json& j, const std::string& what) {
  if (!j.is_number()) parse_fail(what + " must be a number");
  return j.get<double>();
}

inline const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) parse_fail(where + " must be an object");
  const auto it = obj.find(key);
  if (it == obj.end()) parse_fail(where + " is missing \"" + key + "\"");
  return *it;
}

inline std::optional<double> optional_number(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return number(*it, key);
}

}  // namespace detail

inline Matrix parse_matrix(const json& j, const std::string& what) {
  if (!j.is_array()) detail::parse_fail(what + " must be an array of rows");
  const auto rows = static_cast<Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  if (!j.front().is_array()) detail::parse_fail(what + " rows must be arrays");
  const auto cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array()) detail::parse_fail(what + " rows must be arrays");
    if (static_cast<Index>(row.size()) != cols) {
      detail::parse_fail(what + " is ragged: row " + std::to_string(i + 1) + " has " +
                         std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
    }
    for (Index c = 0; c < cols; ++c) m(i, c) = detail::number(row[static_cast<std::size_t>(c)], what + " entry");
  }
  return m;
}

inline Vector parse_vector(const json& j, const std::string& what) {
  if (!j.is_array()) detail::parse_fail(what + " must be an array");
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = detail::number(j[static_cast<std::size_t>(i)], what + " entry");
  return v;
}

inline Mask parse_mask(const json& j) {
  if (!j.is_array()) detail::parse_fail("y_mask must be an array of rows");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = rows == 0 ? Index{0} : static_cast<Index>(j.front().is_array() ? j.front().size() : 0);
  Mask m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) detail::parse_fail("y_mask is ragged");
    for (Index c = 0; c < cols; ++c) {
      const json& e = row[static_cast<std::size_t>(c)];
      if (e.is_boolean()) {
        m(i, c) = e.get<bool>();
      } else if (e.is_number()) {
        m(i, c) = e.get<double>() != 0.0;
      } else {
        detail::parse_fail("y_mask entries must be booleans or 0/1");
      }
    }
  }
  return m;
}

inline StructureSpec parse_structure(const json& j) {
  if (!j.is_object()) detail::parse_fail("structure must be an object");
  StructureSpec spec;
  spec.y_mask = parse_mask(detail::member(j, "y_mask", "structure"));
  if (const auto it = j.find("x_scalar"); it != j.end()) {
    if (!it->is_boolean()) detail::parse_fail("x_scalar must be a boolean");
    spec.x_scalar = it->get<bool>();
  }
  if (const auto it = j.find("y_ties"); it != j.end()) {
    if (!it->is_array()) detail::parse_fail("y_ties must be an array");
    for (const auto& t : *it) {
      if (!t.is_array() || t.size() != 4) detail::parse_fail("each tie is [row_a, col_a, row_b, col_b]");
      std::array<Index, 4> idx{};
      for (std::size_t q = 0; q < 4; ++q) {
        if (!t[q].is_number_integer()) detail::parse_fail("tie indices must be integers");
        idx[q] = t[q].get<Index>() - 1;
      }
      spec.y_ties.push_back({idx[0], idx[1], idx[2], idx[3]});
    }
  }
  return spec;
}

inline ConsensusProblem parse_consensus(const json& j) {
  ConsensusProblem p;
  const json& n = detail::member(j, "n_agents", "consensus");
  if (!n.is_number_integer()) detail::parse_fail("n_agents must be an integer");
  p.n_agents = n.get<int>();
  p.agent_pole = detail::number(detail::member(j, "agent_pole", "consensus"), "agent_pole");
  p.q_weight = detail::number(detail::member(j, "q_weight", "consensus"), "q_weight");
  p.r_weight = detail::number(detail::member(j, "r_weight", "consensus"), "r_weight");
  p.initial_states = parse_vector(detail::member(j, "initial_states", "consensus"), "initial_states");
  return p;
}

inline ProblemFile parse_problem(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    detail::parse_fail(e.what());
  }
  if (!doc.is_object()) detail::parse_fail("problem file must be a JSON object");
  ProblemFile out;
  out.source = text;
  if (const auto it = doc.find("solver"); it != doc.end()) {
    if (!it->is_object()) detail::parse_fail("solver must be an object");
    out.solver.epsilon = detail::optional_number(*it, "epsilon");
    out.solver.feas_tol = detail::optional_number(*it, "feas_tol");
    out.solver.w_cap = detail::optional_number(*it, "w_cap");
    out.solver.horizon = detail::optional_number(*it, "horizon");
    out.solver.step = detail::optional_number(*it, "step");
  }
  if (const auto it = doc.find("consensus"); it != doc.end()) {
    out.consensus = parse_consensus(*it);
    return out;
  }
  const json& system = detail::member(doc, "system", "problem");
  const json& cost = detail::member(doc, "cost", "problem");
  DesignProblem p;
  p.sys.a = parse_matrix(detail::member(system, "A", "system"), "A");
  p.sys.b = parse_matrix(detail::member(system, "B", "system"), "B");
  p.cost.q = parse_matrix(detail::member(cost, "Q", "cost"), "Q");
  p.cost.r = parse_matrix(detail::member(cost, "R", "cost"), "R");
  p.x0 = parse_vector(detail::member(doc, "x0", "problem"), "x0");
  if (const auto it = doc.find("structure"); it != doc.end() && !it->is_null()) {
    p.structure = parse_structure(*it);
  }
  if (out.solver.epsilon) p.tolerances.epsilon = *out.solver.epsilon;
  if (out.solver.feas_tol) p.tolerances.feas_tol = *out.solver.feas_tol;
  out.design = std::move(p);
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) detail::parse_fail("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ProblemFile load_problem(const std::string& path) { return parse_problem(read_file(path)); }

inline GainFile parse_gain(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    detail::parse_fail(e.what());
  }
  if (!doc.is_object()) detail::parse_fail("gain file must be a JSON object");
  GainFile out;
  out.source = text;
  if (const auto it = doc.find("P"); it != doc.end()) out.p = parse_matrix(*it, "P");
  if (const auto it = doc.find("K"); it != doc.end()) out.k = parse_matrix(*it, "K");
  if (out.p.has_value() == out.k.has_value()) detail::parse_fail("gain file needs exactly one of \"P\" or \"K\"");
  return out;
}

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline json to_json(const Spectrum& s) {
  json out = json::array();
  for (const auto& l : s.eigenvalues) out.push_back({{"re", l.real()}, {"im", l.imag()}});
  return out;
}

/// JSON has no infinity; non-finite numbers are written as null.
inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const DesignCertificate& c) {
  json margins = json::array();
  for (const auto& m : c.diagnostics.margins) {
    margins.push_back({{"name", m.name},
                       {"sense", to_string(m.sense)},
                       {"achieved", m.achieved},
                       {"required", m.required},
                       {"ok", m.ok}});
  }
  return {
      {"X", to_json(c.x)},
      {"Y", to_json(c.y)},
      {"W", to_json(c.w)},
      {"P_lower", to_json(c.p_lower)},
      {"P", to_json(c.p)},
      {"K", to_json(c.k)},
      {"A_cl", to_json(c.a_cl)},
      {"P_hat", to_json(c.p_hat)},
      {"trace_term", c.trace_term},
      {"gamma_bar", c.gamma_bar},
      {"closed_loop_symmetry_residual", c.diagnostics.closed_loop_symmetry_residual},
      {"p_spectrum", to_json(c.diagnostics.p_spectrum)},
      {"margins", margins},
  };
}

inline json solver_json(const DesignCertificate& c) {
  return {{"slack", c.diagnostics.solver_slack},
          {"outer_iterations", c.diagnostics.solver_outer_iterations},
          {"newton_iterations", c.diagnostics.solver_newton_iterations},
          {"w_cap", c.diagnostics.w_cap},
          {"variable_bound", c.diagnostics.variable_bound}};
}

inline json to_json(const VerificationReport& r) {
  json out = {
      {"hurwitz", r.hurwitz},
      {"spectral_abscissa", r.spectral_abscissa},
      {"closed_loop_symmetry_residual", r.closed_loop_symmetry_residual},
      {"K", to_json(r.k)},
      {"j_analytic", number_or_null(r.j_analytic)},
      {"j_simulated", r.j_simulated ? number_or_null(*r.j_simulated) : json(nullptr)},
      {"simulation_converged", r.simulation_converged},
      {"j_star", r.j_star ? json(*r.j_star) : json(nullptr)},
      {"care_residual", r.care_residual ? json(*r.care_residual) : json(nullptr)},
      {"gamma_bar", r.gamma_bar ? json(*r.gamma_bar) : json(nullptr)},
      {"bound_ok", r.bound_ok},
      {"degenerate_x0", r.degenerate_x0},
      {"oracles_agree", r.oracles_agree()},
  };
  if (r.z.size() > 0) out["Z"] = to_json(r.z);
  if (r.p_spectrum) out["p_spectrum"] = to_json(*r.p_spectrum);
  return out;
}

inline void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace asymlyap::io
