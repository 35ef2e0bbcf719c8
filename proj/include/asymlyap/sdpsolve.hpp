#pragma once

// Feasibility solver for small dense systems of affine matrix constraints.
//
// Equality (Zero) constraints are eliminated first: single-variable pins and
// two-variable equalities are substituted exactly, whatever remains goes
// through an SVD null-space parameterization v = offset + basis * z. The
// definite constraints are then shifted by their margins and the slack
// problem
//
//     minimize t   subject to   F_i(z) + t I >= 0,   ||z|| < variable_bound
//
// is solved by log-barrier path following with damped Newton steps. A final
// slack t < 0 certifies that every constraint holds with its margin.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asymlyap/error.hpp"
#include "asymlyap/lmi.hpp"
#include "asymlyap/matops.hpp"

namespace asymlyap {

enum class FeasibilityStatus { Feasible, Infeasible, NumericalTrouble };

constexpr const char* to_string(FeasibilityStatus s) noexcept {
  switch (s) {
    case FeasibilityStatus::Feasible: return "Feasible";
    case FeasibilityStatus::Infeasible: return "Infeasible";
    case FeasibilityStatus::NumericalTrouble: return "NumericalTrouble";
  }
  return "?";
}

struct FeasibilityOptions {
  double feas_tol = 1e-7;
  double initial_barrier = 1.0;
  double barrier_decrease = 0.2;
  double newton_tol = 1e-9;
  /// Stop once the slack is within gap_tol * max(1, |t|) of optimal.
  double gap_tol = 1e-9;
  int max_outer = 200;
  int max_newton = 100;
  /// Radius of the ball the free coordinates are kept in. Keeps the slack
  /// problem bounded when the feasible set is a cone.
  double variable_bound = 1e4;
  /// Optional linear objective over the layout scalars, minimized after
  /// feasibility is established while keeping every margin.
  std::optional<Vector> objective;
  /// Gap at which the objective phase stops; gap_tol when unset. A loose
  /// value keeps the point away from the boundary.
  std::optional<double> objective_gap_tol;
};

struct ConstraintMargin {
  std::string name;
  ConstraintSense sense = ConstraintSense::PositiveDefinite;
  /// Min eigenvalue for definite constraints, max |entry| for equalities.
  double achieved = 0.0;
  double required = 0.0;
  bool ok = false;
};

struct FeasibilityResult {
  FeasibilityStatus status = FeasibilityStatus::NumericalTrouble;
  std::optional<Vector> assignment;
  std::vector<ConstraintMargin> margins;
  /// Best slack of the margin-shifted problem; negative iff strictly feasible.
  double slack = std::numeric_limits<double>::infinity();
  /// Best slack after each outer iteration (non-increasing).
  std::vector<double> slack_history;
  int outer_iterations = 0;
  int newton_iterations = 0;
  std::string message;

  [[nodiscard]] bool feasible() const noexcept { return status == FeasibilityStatus::Feasible; }
};

/// Independent re-evaluation of every constraint at `v`.
inline std::vector<ConstraintMargin> evaluate_margins(std::span<const AffineMatrixConstraint> constraints,
                                                      const Vector& v, double feas_tol) {
  std::vector<ConstraintMargin> out;
  out.reserve(constraints.size());
  for (const auto& c : constraints) {
    ConstraintMargin m;
    m.name = c.name;
    m.sense = c.sense;
    m.achieved = c.achieved(v);
    m.required = c.margin;
    m.ok = c.satisfied(v, feas_tol);
    out.push_back(std::move(m));
  }
  return out;
}

/// Solver interface; the barrier method below is the built-in implementation.
class FeasibilityBackend {
 public:
  virtual ~FeasibilityBackend() = default;
  [[nodiscard]] virtual FeasibilityResult solve(std::span<const AffineMatrixConstraint> constraints,
                                                const VariableLayout& layout,
                                                const FeasibilityOptions& opts) const = 0;
};

namespace detail {

/// v = offset + basis * z
struct AffineParameterization {
  Vector offset;
  Matrix basis;
};

struct EqualityRow {
  std::vector<std::pair<Index, double>> coefs;
  double rhs = 0.0;
};

class EqualityReducer {
 public:
  explicit EqualityReducer(Index n) : parent_(static_cast<std::size_t>(n)), pinned_(static_cast<std::size_t>(n)) {
    std::iota(parent_.begin(), parent_.end(), Index{0});
  }

  /// Returns nullopt (with `why` set) when the equalities are inconsistent.
  std::optional<AffineParameterization> reduce(std::vector<EqualityRow> rows, double tol,
                                               std::string& why) {
    std::vector<bool> active(rows.size(), true);
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!active[r]) continue;
        auto [agg, rhs] = aggregate(rows[r]);
        if (agg.empty()) {
          if (std::abs(rhs) > tol) {
            why = "inconsistent equality constraints";
            return std::nullopt;
          }
          active[r] = false;
          changed = true;
        } else if (agg.size() == 1) {
          const auto [k, c] = *agg.begin();
          pinned_[static_cast<std::size_t>(k)] = rhs / c;
          active[r] = false;
          changed = true;
        } else if (agg.size() == 2 && rhs == 0.0) {
          const auto a = *agg.begin();
          const auto b = *std::next(agg.begin());
          if (a.second == -b.second) {
            parent_[static_cast<std::size_t>(b.first)] = a.first;
            active[r] = false;
            changed = true;
          }
        }
      }
    }

    // Free coordinates: unpinned representatives, in index order.
    const Index n = static_cast<Index>(parent_.size());
    std::map<Index, Index> column;
    for (Index k = 0; k < n; ++k) {
      if (find(k) == k && !pinned_[static_cast<std::size_t>(k)]) {
        const Index next = static_cast<Index>(column.size());
        column.emplace(k, next);
      }
    }
    const Index free = static_cast<Index>(column.size());
    Matrix t = Matrix::Zero(n, free);
    Vector p = Vector::Zero(n);
    for (Index k = 0; k < n; ++k) {
      const Index r = find(k);
      if (const auto& pin = pinned_[static_cast<std::size_t>(r)]) {
        p(k) = *pin;
      } else {
        t(k, column.at(r)) = 1.0;
      }
    }

    std::vector<std::size_t> remaining;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (active[r]) remaining.push_back(r);
    }
    Vector y0 = Vector::Zero(free);
    Matrix null_basis = Matrix::Identity(free, free);
    if (!remaining.empty()) {
      Matrix e = Matrix::Zero(static_cast<Index>(remaining.size()), free);
      Vector b(static_cast<Index>(remaining.size()));
      for (std::size_t i = 0; i < remaining.size(); ++i) {
        auto [agg, rhs] = aggregate(rows[remaining[i]]);
        for (const auto& [k, c] : agg) e(static_cast<Index>(i), column.at(k)) = c;
        b(static_cast<Index>(i)) = rhs;
      }
      Eigen::JacobiSVD<Matrix> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
      const auto& sv = svd.singularValues();
      const double smax = sv.size() > 0 ? sv(0) : 0.0;
      Index rank = 0;
      for (Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > 1e-10 * smax) ++rank;
      }
      svd.setThreshold(1e-10);
      y0 = svd.solve(b);
      if ((e * y0 - b).cwiseAbs().maxCoeff() > tol) {
        why = "inconsistent equality constraints";
        return std::nullopt;
      }
      null_basis = svd.matrixV().rightCols(free - rank);
    }
    return AffineParameterization{p + t * y0, t * null_basis};
  }

 private:
  Index find(Index k) {
    while (parent_[static_cast<std::size_t>(k)] != k) {
      auto& pk = parent_[static_cast<std::size_t>(k)];
      pk = parent_[static_cast<std::size_t>(pk)];
      k = pk;
    }
    return k;
  }

  std::pair<std::map<Index, double>, double> aggregate(const EqualityRow& row) {
    std::map<Index, double> agg;
    double rhs = row.rhs;
    double scale = 0.0;
    for (const auto& [k, c] : row.coefs) {
      scale = std::max(scale, std::abs(c));
      const Index r = find(k);
      if (const auto& pin = pinned_[static_cast<std::size_t>(r)]) {
        rhs -= c * *pin;
      } else {
        agg[r] += c;
      }
    }
    std::erase_if(agg, [&](const auto& kv) { return std::abs(kv.second) <= 1e-14 * scale; });
    return {agg, rhs};
  }

  std::vector<Index> parent_;
  std::vector<std::optional<double>> pinned_;
};

/// One definite constraint in reduced coordinates, oriented to be >= 0 and
/// shifted by its margin:  F(z) = f0 + sum_j z_j d[j].
struct ReducedLmi {
  Matrix f0;
  std::vector<Matrix> d;
};

/// Log-barrier objective over x = (z[, t]).
class BarrierFunction {
 public:
  BarrierFunction(const std::vector<ReducedLmi>& lmis, Index free, bool with_slack, double radius,
                  Vector cost)
      : lmis_(lmis), free_(free), with_slack_(with_slack), radius_(radius), cost_(std::move(cost)) {}

  [[nodiscard]] Index size() const noexcept { return free_ + (with_slack_ ? 1 : 0); }

  /// Number of barrier terms weighted by their degree; bounds the duality gap
  /// as degree / s on the central path.
  [[nodiscard]] double degree() const noexcept {
    double m = 1.0;
    for (const auto& l : lmis_) m += static_cast<double>(l.f0.rows());
    return m;
  }

  [[nodiscard]] Matrix shifted(std::size_t i, const Vector& x) const {
    const auto& l = lmis_[i];
    Matrix m = l.f0;
    for (Index j = 0; j < free_; ++j) m += x(j) * l.d[static_cast<std::size_t>(j)];
    if (with_slack_) m.diagonal().array() += x(free_);
    return m;
  }

  /// s * c^T x - sum log det F_i - log(R^2 - |z|^2); nullopt outside the domain.
  [[nodiscard]] std::optional<double> value(const Vector& x, double s) const {
    double v = s * cost_.dot(x);
    for (std::size_t i = 0; i < lmis_.size(); ++i) {
      Eigen::LLT<Matrix> llt(shifted(i, x));
      if (llt.info() != Eigen::Success) return std::nullopt;
      v -= 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    }
    const double room = radius_ * radius_ - x.head(free_).squaredNorm();
    if (!(room > 0.0)) return std::nullopt;
    v -= std::log(room);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  }

  void derivatives(const Vector& x, double s, Vector& g, Matrix& h) const {
    const Index dim = size();
    g = s * cost_;
    h = Matrix::Zero(dim, dim);
    std::vector<Matrix> scaled(static_cast<std::size_t>(dim));
    for (std::size_t i = 0; i < lmis_.size(); ++i) {
      const auto& l = lmis_[i];
      const Index sz = l.f0.rows();
      Eigen::LLT<Matrix> llt(shifted(i, x));
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::IterationLimit, "iterate left the barrier domain");
      }
      const Matrix inv = llt.solve(Matrix::Identity(sz, sz));
      for (Index j = 0; j < free_; ++j) scaled[static_cast<std::size_t>(j)] = inv * l.d[static_cast<std::size_t>(j)];
      if (with_slack_) scaled[static_cast<std::size_t>(free_)] = inv;
      for (Index j = 0; j < dim; ++j) {
        const auto& gj = scaled[static_cast<std::size_t>(j)];
        g(j) -= gj.trace();
        for (Index k = j; k < dim; ++k) {
          const double hjk = (gj.array() * scaled[static_cast<std::size_t>(k)].transpose().array()).sum();
          h(j, k) += hjk;
          if (k != j) h(k, j) += hjk;
        }
      }
    }
    const Vector z = x.head(free_);
    const double room = radius_ * radius_ - z.squaredNorm();
    g.head(free_) += 2.0 * z / room;
    h.topLeftCorner(free_, free_) +=
        (2.0 / room) * Matrix::Identity(free_, free_) + (4.0 / (room * room)) * z * z.transpose();
  }

 private:
  const std::vector<ReducedLmi>& lmis_;
  Index free_;
  bool with_slack_;
  double radius_;
  Vector cost_;
};

struct CenteringOutcome {
  int newton_steps = 0;
  bool converged = false;
};

/// Damped Newton minimization of the barrier at weight s.
inline CenteringOutcome center(const BarrierFunction& f, Vector& x, double s,
                               const FeasibilityOptions& opts) {
  CenteringOutcome out;
  Vector g;
  Matrix h;
  for (int it = 0; it < opts.max_newton; ++it) {
    f.derivatives(x, s, g, h);
    Eigen::LDLT<Matrix> ldlt(h);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorCode::IterationLimit, "singular Newton system");
    const Vector dx = -ldlt.solve(g);
    if (!dx.allFinite()) throw Error(ErrorCode::NonFinite, "Newton step is not finite");
    const double decrement = -g.dot(dx);
    ++out.newton_steps;
    if (decrement / 2.0 <= opts.newton_tol) {
      out.converged = true;
      return out;
    }
    const auto f0 = f.value(x, s);
    if (!f0) throw Error(ErrorCode::IterationLimit, "iterate left the barrier domain");
    double step = 1.0;
    bool accepted = false;
    while (step > 1e-14) {
      const Vector trial = x + step * dx;
      if (const auto ft = f.value(trial, s); ft && *ft <= *f0 + 0.25 * step * g.dot(dx)) {
        x = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Rounding floor: the decrement cannot be reduced further.
      out.converged = decrement < 1e-6;
      return out;
    }
  }
  return out;
}

/// Largest violation over the shifted constraints at z (no slack variable).
inline double true_slack(const std::vector<ReducedLmi>& lmis, const Vector& z) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& l : lmis) {
    Matrix m = l.f0;
    for (Index j = 0; j < z.size(); ++j) m += z(j) * l.d[static_cast<std::size_t>(j)];
    worst = std::max(worst, -min_eig_of_symmetric_part(m));
  }
  return worst;
}

}  // namespace detail

class BarrierBackend final : public FeasibilityBackend {
 public:
  [[nodiscard]] FeasibilityResult solve(std::span<const AffineMatrixConstraint> constraints,
                                        const VariableLayout& layout,
                                        const FeasibilityOptions& opts) const override {
    validate(constraints, layout, opts);
    FeasibilityResult result;
    try {
      run(constraints, layout, opts, result);
    } catch (const Error& e) {
      result.status = FeasibilityStatus::NumericalTrouble;
      result.assignment.reset();
      result.message = e.what();
    }
    return result;
  }

 private:
  static void validate(std::span<const AffineMatrixConstraint> constraints,
                       const VariableLayout& layout, const FeasibilityOptions& opts) {
    if (constraints.empty()) throw Error(ErrorCode::InvalidArgument, "no constraints given");
    for (const auto& c : constraints) {
      for (const auto& [k, m] : c.coefficients) {
        if (k < 0 || k >= layout.dimension()) {
          throw Error(ErrorCode::DimensionMismatch, c.name + " references a variable outside the layout");
        }
        require_shape(m, c.dim(), c.dim(), c.name + " coefficient");
      }
    }
    if (opts.objective && opts.objective->size() != layout.dimension()) {
      throw Error(ErrorCode::DimensionMismatch, "objective length differs from layout dimension");
    }
    if (!(opts.barrier_decrease > 0.0 && opts.barrier_decrease < 1.0) || !(opts.initial_barrier > 0.0) ||
        !(opts.variable_bound > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "invalid barrier parameters");
    }
  }

  static void run(std::span<const AffineMatrixConstraint> constraints, const VariableLayout& layout,
                  const FeasibilityOptions& opts, FeasibilityResult& result) {
    const Index nvars = layout.dimension();

    std::vector<detail::EqualityRow> rows;
    std::vector<const AffineMatrixConstraint*> definite;
    for (const auto& c : constraints) {
      if (c.sense != ConstraintSense::Zero) {
        definite.push_back(&c);
        continue;
      }
      for (Index i = 0; i < c.dim(); ++i) {
        for (Index j = i; j < c.dim(); ++j) {
          detail::EqualityRow row;
          row.rhs = -c.constant(i, j);
          for (const auto& [k, m] : c.coefficients) {
            if (m(i, j) != 0.0) row.coefs.emplace_back(k, m(i, j));
          }
          if (row.coefs.empty() && row.rhs == 0.0) continue;
          rows.push_back(std::move(row));
        }
      }
    }

    std::string why;
    const auto param = detail::EqualityReducer(nvars).reduce(std::move(rows), opts.feas_tol, why);
    if (!param) {
      result.status = FeasibilityStatus::Infeasible;
      result.message = why;
      return;
    }
    const Index free = param->basis.cols();

    std::vector<detail::ReducedLmi> lmis;
    lmis.reserve(definite.size());
    for (const auto* c : definite) {
      const double sign = c->sense == ConstraintSense::PositiveDefinite ? 1.0 : -1.0;
      detail::ReducedLmi l;
      l.f0 = c->constant;
      l.d.assign(static_cast<std::size_t>(free), Matrix::Zero(c->dim(), c->dim()));
      for (const auto& [k, m] : c->coefficients) {
        l.f0 += param->offset(k) * m;
        for (Index j = 0; j < free; ++j) {
          const double w = param->basis(k, j);
          if (w != 0.0) l.d[static_cast<std::size_t>(j)] += w * m;
        }
      }
      l.f0 *= sign;
      l.f0.diagonal().array() -= c->margin;
      for (auto& dj : l.d) dj *= sign;
      lmis.push_back(std::move(l));
    }

    Vector z = Vector::Zero(free);
    result.status = FeasibilityStatus::Infeasible;
    if (lmis.empty()) {
      result.slack = -std::numeric_limits<double>::infinity();
    } else {
      phase_slack(lmis, free, opts, z, result);
    }

    if (result.slack < 0.0) {
      if (opts.objective && free > 0) phase_objective(lmis, *param, opts, z, result);
      const Vector v = param->offset + param->basis * z;
      result.margins = evaluate_margins(constraints, v, opts.feas_tol);
      const bool all_ok =
          std::all_of(result.margins.begin(), result.margins.end(), [](const auto& m) { return m.ok; });
      if (all_ok) {
        result.status = FeasibilityStatus::Feasible;
        result.assignment = v;
      } else {
        result.status = FeasibilityStatus::NumericalTrouble;
        result.message = "re-evaluation of the solution violates a constraint";
      }
    } else if (result.status != FeasibilityStatus::NumericalTrouble) {
      result.status = FeasibilityStatus::Infeasible;
      if (result.message.empty()) result.message = "minimized slack is not negative";
      result.margins = evaluate_margins(constraints, param->offset + param->basis * z, opts.feas_tol);
    }
  }

  static void phase_slack(const std::vector<detail::ReducedLmi>& lmis, Index free,
                          const FeasibilityOptions& opts, Vector& z, FeasibilityResult& result) {
    Vector cost = Vector::Zero(free + 1);
    cost(free) = 1.0;
    const detail::BarrierFunction barrier(lmis, free, true, opts.variable_bound, cost);

    const double start = detail::true_slack(lmis, z);
    Vector x(free + 1);
    x.head(free) = z;
    x(free) = start + 1.0 + 0.1 * std::abs(start);

    Vector best_z = z;
    double best = start;
    double s = 1.0 / opts.initial_barrier;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
      const auto step = detail::center(barrier, x, s, opts);
      result.newton_iterations += step.newton_steps;
      result.outer_iterations = outer + 1;
      const double current = detail::true_slack(lmis, x.head(free));
      if (current < best) {
        best = current;
        best_z = x.head(free);
      }
      result.slack_history.push_back(best);

      const double gap = barrier.degree() / s;
      if (step.converged && x(free) - gap > 0.0) {
        result.message = "slack bounded away from zero (certified infeasible)";
        break;
      }
      if (gap <= opts.gap_tol * std::max(1.0, std::abs(x(free)))) break;
      if (!step.converged) {
        result.message = "Newton centering stalled";
        if (best >= 0.0) result.status = FeasibilityStatus::NumericalTrouble;
        break;
      }
      s /= opts.barrier_decrease;
    }
    z = best_z;
    result.slack = best;
  }

  static void phase_objective(const std::vector<detail::ReducedLmi>& lmis,
                              const detail::AffineParameterization& param,
                              const FeasibilityOptions& opts, Vector& z, FeasibilityResult& result) {
    const Vector cost = param.basis.transpose() * *opts.objective;
    const detail::BarrierFunction barrier(lmis, param.basis.cols(), false, opts.variable_bound, cost);
    Vector x = z;
    double s = 1.0 / opts.initial_barrier;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
      const auto step = detail::center(barrier, x, s, opts);
      result.newton_iterations += step.newton_steps;
      const double gap = barrier.degree() / s;
      const double tol = opts.objective_gap_tol.value_or(opts.gap_tol);
      if (gap <= tol * std::max(1.0, std::abs(cost.dot(x))) || !step.converged) break;
      s /= opts.barrier_decrease;
    }
    if (detail::true_slack(lmis, x) < 0.0) z = x;
  }
};

inline FeasibilityResult solve_feasibility(std::span<const AffineMatrixConstraint> constraints,
                                           const VariableLayout& layout,
                                           const FeasibilityOptions& opts = {}) {
  return BarrierBackend{}.solve(constraints, layout, opts);
}

}  // namespace asymlyap
