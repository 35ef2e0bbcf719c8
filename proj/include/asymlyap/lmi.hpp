#pragma once

// Affine matrix constraints over a shared vector of scalar decision
// variables, and the builders for the stabilization LMI, the 3x3-block
// suboptimality LMI, the closed-loop realness equality, and structural pins.

#include <initializer_list>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "asymlyap/error.hpp"
#include "asymlyap/matops.hpp"
#include "asymlyap/system.hpp"

namespace asymlyap {

/// Matrix-valued affine function  M(v) = constant + sum_k v_k * terms[k].
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(Index rows, Index cols) : constant_(Matrix::Zero(rows, cols)) {}

  static AffineExpr constant(const Matrix& m) {
    AffineExpr e;
    e.constant_ = m;
    return e;
  }

  [[nodiscard]] Index rows() const noexcept { return constant_.rows(); }
  [[nodiscard]] Index cols() const noexcept { return constant_.cols(); }
  [[nodiscard]] const Matrix& constant_term() const noexcept { return constant_; }
  [[nodiscard]] const std::map<Index, Matrix>& terms() const noexcept { return terms_; }

  void add_term(Index var, const Matrix& coeff) {
    require_shape(coeff, rows(), cols(), "affine coefficient");
    auto [it, inserted] = terms_.try_emplace(var, coeff);
    if (!inserted) it->second += coeff;
  }

  [[nodiscard]] Matrix evaluate(const Vector& v) const {
    Matrix out = constant_;
    for (const auto& [k, c] : terms_) {
      if (k >= v.size()) throw Error(ErrorCode::DimensionMismatch, "assignment too short");
      out += v(k) * c;
    }
    return out;
  }

  [[nodiscard]] AffineExpr transpose() const {
    AffineExpr e = constant(constant_.transpose());
    for (const auto& [k, c] : terms_) e.terms_.emplace(k, c.transpose());
    return e;
  }

  AffineExpr& operator+=(const AffineExpr& o) {
    require_shape(o.constant_, rows(), cols(), "affine summand");
    constant_ += o.constant_;
    for (const auto& [k, c] : o.terms_) add_term(k, c);
    return *this;
  }

  AffineExpr& operator-=(const AffineExpr& o) { return *this += -o; }

  friend AffineExpr operator-(const AffineExpr& e) { return -1.0 * e; }
  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }

  friend AffineExpr operator*(double s, const AffineExpr& e) {
    AffineExpr out = constant(s * e.constant_);
    for (const auto& [k, c] : e.terms_) out.terms_.emplace(k, s * c);
    return out;
  }

  friend AffineExpr operator*(const Matrix& m, const AffineExpr& e) {
    if (m.cols() != e.rows()) throw Error(ErrorCode::DimensionMismatch, "left factor shape");
    AffineExpr out = constant(m * e.constant_);
    for (const auto& [k, c] : e.terms_) out.terms_.emplace(k, m * c);
    return out;
  }

  friend AffineExpr operator*(const AffineExpr& e, const Matrix& m) {
    if (e.cols() != m.rows()) throw Error(ErrorCode::DimensionMismatch, "right factor shape");
    AffineExpr out = constant(e.constant_ * m);
    for (const auto& [k, c] : e.terms_) out.terms_.emplace(k, c * m);
    return out;
  }

 private:
  Matrix constant_;
  std::map<Index, Matrix> terms_;
};

/// Assembles a block matrix; every row must have consistent heights and every
/// column consistent widths.
inline AffineExpr block_matrix(const std::vector<std::vector<AffineExpr>>& grid) {
  if (grid.empty() || grid.front().empty()) return AffineExpr(0, 0);
  const std::size_t br = grid.size();
  const std::size_t bc = grid.front().size();
  std::vector<Index> heights(br), widths(bc);
  for (std::size_t i = 0; i < br; ++i) {
    if (grid[i].size() != bc) throw Error(ErrorCode::DimensionMismatch, "ragged block grid");
    heights[i] = grid[i][0].rows();
  }
  for (std::size_t j = 0; j < bc; ++j) widths[j] = grid[0][j].cols();
  Index total_rows = 0, total_cols = 0;
  for (auto h : heights) total_rows += h;
  for (auto w : widths) total_cols += w;

  Matrix constant = Matrix::Zero(total_rows, total_cols);
  std::map<Index, Matrix> terms;
  Index r0 = 0;
  for (std::size_t i = 0; i < br; ++i) {
    Index c0 = 0;
    for (std::size_t j = 0; j < bc; ++j) {
      const auto& blk = grid[i][j];
      require_shape(blk.constant_term(), heights[i], widths[j], "block (" + std::to_string(i) +
                                                                     "," + std::to_string(j) + ")");
      constant.block(r0, c0, heights[i], widths[j]) = blk.constant_term();
      for (const auto& [k, c] : blk.terms()) {
        auto [it, inserted] = terms.try_emplace(k, Matrix::Zero(total_rows, total_cols));
        it->second.block(r0, c0, heights[i], widths[j]) += c;
      }
      c0 += widths[j];
    }
    r0 += heights[i];
  }
  AffineExpr out = AffineExpr::constant(constant);
  for (const auto& [k, c] : terms) out.add_term(k, c);
  return out;
}

enum class BlockKind { Symmetric, General };

struct VariableBlock {
  std::string name;
  BlockKind kind;
  Index rows;
  Index cols;
  Index offset;

  [[nodiscard]] Index size() const noexcept {
    return kind == BlockKind::Symmetric ? rows * (rows + 1) / 2 : rows * cols;
  }
};

/// Named matrix blocks laid out contiguously in one scalar vector. Symmetric
/// blocks store their upper triangle row by row; general blocks store every
/// entry row-major.
class VariableLayout {
 public:
  VariableLayout& add_symmetric(const std::string& name, Index n) {
    return add({name, BlockKind::Symmetric, n, n, dimension_});
  }

  VariableLayout& add_general(const std::string& name, Index rows, Index cols) {
    return add({name, BlockKind::General, rows, cols, dimension_});
  }

  /// X (symmetric), Y (general), W (symmetric), P_lower (general), all n x n.
  static VariableLayout for_design(Index n) {
    VariableLayout l;
    l.add_symmetric("X", n).add_general("Y", n, n).add_symmetric("W", n).add_general("P_lower", n, n);
    return l;
  }

  [[nodiscard]] Index dimension() const noexcept { return dimension_; }
  [[nodiscard]] const std::vector<VariableBlock>& blocks() const noexcept { return blocks_; }

  [[nodiscard]] bool has(const std::string& name) const {
    for (const auto& b : blocks_) {
      if (b.name == name) return true;
    }
    return false;
  }

  [[nodiscard]] const VariableBlock& block(const std::string& name) const {
    for (const auto& b : blocks_) {
      if (b.name == name) return b;
    }
    throw Error(ErrorCode::InvalidArgument, "no variable block named " + name);
  }

  [[nodiscard]] Index index(const std::string& name, Index i, Index j) const {
    const auto& b = block(name);
    if (i < 0 || j < 0 || i >= b.rows || j >= b.cols) {
      throw Error(ErrorCode::DimensionMismatch, "entry outside block " + name);
    }
    if (b.kind == BlockKind::General) return b.offset + i * b.cols + j;
    if (i > j) std::swap(i, j);
    return b.offset + i * b.rows - i * (i - 1) / 2 + (j - i);
  }

  /// The block as an affine expression in the layout's scalars.
  [[nodiscard]] AffineExpr expr(const std::string& name) const {
    const auto& b = block(name);
    AffineExpr e(b.rows, b.cols);
    for (Index i = 0; i < b.rows; ++i) {
      for (Index j = 0; j < b.cols; ++j) {
        if (b.kind == BlockKind::Symmetric && j < i) continue;
        Matrix unit = Matrix::Zero(b.rows, b.cols);
        unit(i, j) = 1.0;
        if (b.kind == BlockKind::Symmetric) unit(j, i) = 1.0;
        e.add_term(index(name, i, j), unit);
      }
    }
    return e;
  }

  [[nodiscard]] Matrix extract(const std::string& name, const Vector& v) const {
    const auto& b = block(name);
    if (v.size() != dimension_) throw Error(ErrorCode::DimensionMismatch, "assignment size");
    Matrix m(b.rows, b.cols);
    for (Index i = 0; i < b.rows; ++i) {
      for (Index j = 0; j < b.cols; ++j) m(i, j) = v(index(name, i, j));
    }
    return m;
  }

  /// Writes `value` into the block's slice of `v` (upper triangle for
  /// symmetric blocks).
  void assign(const std::string& name, const Matrix& value, Vector& v) const {
    const auto& b = block(name);
    require_shape(value, b.rows, b.cols, "value for block " + name);
    if (v.size() != dimension_) v = Vector::Zero(dimension_);
    for (Index i = 0; i < b.rows; ++i) {
      for (Index j = 0; j < b.cols; ++j) {
        if (b.kind == BlockKind::Symmetric && j < i) continue;
        v(index(name, i, j)) = value(i, j);
      }
    }
  }

 private:
  VariableLayout& add(VariableBlock b) {
    if (has(b.name)) throw Error(ErrorCode::InvalidArgument, "duplicate block name " + b.name);
    if (b.rows < 0 || b.cols < 0) throw Error(ErrorCode::DimensionMismatch, "negative block size");
    dimension_ += b.size();
    blocks_.push_back(std::move(b));
    return *this;
  }

  std::vector<VariableBlock> blocks_;
  Index dimension_ = 0;
};

enum class ConstraintSense { PositiveDefinite, NegativeDefinite, Zero };

constexpr const char* to_string(ConstraintSense s) noexcept {
  switch (s) {
    case ConstraintSense::PositiveDefinite: return "PositiveDefinite";
    case ConstraintSense::NegativeDefinite: return "NegativeDefinite";
    case ConstraintSense::Zero: return "Zero";
  }
  return "?";
}

/// G(v) = constant + sum_k v_k C_k with symmetric constant and coefficients.
/// PositiveDefinite means G >= margin*I, NegativeDefinite G <= -margin*I, Zero
/// G = 0.
struct AffineMatrixConstraint {
  std::string name;
  Matrix constant;
  std::vector<std::pair<Index, Matrix>> coefficients;
  ConstraintSense sense = ConstraintSense::PositiveDefinite;
  double margin = 0.0;

  static AffineMatrixConstraint from_expr(std::string name, const AffineExpr& e,
                                          ConstraintSense sense, double margin) {
    if (e.rows() != e.cols()) throw Error(ErrorCode::NonSquare, name + " is not square");
    if (margin < 0.0) throw Error(ErrorCode::InvalidArgument, name + " has a negative margin");
    auto checked = [&](const Matrix& m) {
      if (symmetry_residual(m) > 1e-10 * (1.0 + m.norm())) {
        throw Error(ErrorCode::NotSymmetric, name + " is not symmetric in its variables");
      }
      return Matrix(symmetric_part(m));
    };
    AffineMatrixConstraint c;
    c.name = std::move(name);
    c.constant = checked(e.constant_term());
    for (const auto& [k, m] : e.terms()) {
      if (m.cwiseAbs().maxCoeff() == 0.0) continue;
      c.coefficients.emplace_back(k, checked(m));
    }
    c.sense = sense;
    c.margin = margin;
    return c;
  }

  [[nodiscard]] Index dim() const noexcept { return constant.rows(); }

  [[nodiscard]] Matrix evaluate(const Vector& v) const {
    Matrix g = constant;
    for (const auto& [k, m] : coefficients) {
      if (k >= v.size()) throw Error(ErrorCode::DimensionMismatch, "assignment too short");
      g += v(k) * m;
    }
    return g;
  }

  /// Min eigenvalue of G (PositiveDefinite), of -G (NegativeDefinite), or the
  /// largest absolute entry of G (Zero).
  [[nodiscard]] double achieved(const Vector& v) const {
    const Matrix g = evaluate(v);
    if (g.size() == 0) return sense == ConstraintSense::Zero ? 0.0 : std::numeric_limits<double>::infinity();
    switch (sense) {
      case ConstraintSense::PositiveDefinite: return min_eig_of_symmetric_part(g);
      case ConstraintSense::NegativeDefinite: return min_eig_of_symmetric_part(-g);
      case ConstraintSense::Zero: return g.cwiseAbs().maxCoeff();
    }
    return 0.0;
  }

  [[nodiscard]] bool satisfied(const Vector& v, double tol) const {
    const double a = achieved(v);
    return sense == ConstraintSense::Zero ? a <= tol : a >= margin - tol;
  }
};

/// Default strictness parameter; margins are epsilon * (1 + ||A||_F).
inline constexpr double kDefaultEpsilon = 1e-6;

inline double strictness_margin(const LtiSystem& sys, double epsilon) {
  return epsilon * (1.0 + sys.a.norm());
}

namespace detail {

inline void require_design_blocks(const LtiSystem& sys, const VariableLayout& layout,
                                  std::initializer_list<const char*> names) {
  const Index n = sys.states();
  for (const char* name : names) {
    const auto& b = layout.block(name);
    if (b.rows != n || b.cols != n) {
      throw Error(ErrorCode::DimensionMismatch, std::string("block ") + name + " must be " +
                                                    std::to_string(n) + "x" + std::to_string(n));
    }
  }
}

inline void check_problem_data(const LtiSystem& sys, const QuadraticCost& cost) {
  validate_system(sys);
  validate_cost(sys, cost);
}

}  // namespace detail

/// X A^T + A X - Y^T S - S Y < 0, with S = B R^-1 B^T.
inline AffineMatrixConstraint build_stability_lmi(const LtiSystem& sys, const QuadraticCost& cost,
                                                  const VariableLayout& layout,
                                                  double epsilon = kDefaultEpsilon) {
  detail::check_problem_data(sys, cost);
  detail::require_design_blocks(sys, layout, {"X", "Y"});
  const Matrix s = input_weight(sys, cost);
  const AffineExpr x = layout.expr("X");
  const AffineExpr y = layout.expr("Y");
  const AffineExpr lhs = x * sys.a.transpose() + sys.a * x - y.transpose() * s - s * y;
  return AffineMatrixConstraint::from_expr("stability", lhs, ConstraintSense::NegativeDefinite,
                                           strictness_margin(sys, epsilon));
}

/// [[A^T Pl + Pl^T A - Q + W, (I + Y^T A)^T, Pl^T B],
///  [I + Y^T A,               X,             0     ],
///  [B^T Pl,                  0,             R     ]] > 0
inline AffineMatrixConstraint build_suboptimality_lmi(const LtiSystem& sys,
                                                      const QuadraticCost& cost,
                                                      const VariableLayout& layout,
                                                      double epsilon = kDefaultEpsilon) {
  detail::check_problem_data(sys, cost);
  detail::require_design_blocks(sys, layout, {"X", "Y", "W", "P_lower"});
  const Index n = sys.states();
  const Index m = sys.inputs();
  const AffineExpr x = layout.expr("X");
  const AffineExpr y = layout.expr("Y");
  const AffineExpr w = layout.expr("W");
  const AffineExpr pl = layout.expr("P_lower");

  const AffineExpr top_left =
      sys.a.transpose() * pl + pl.transpose() * sys.a - AffineExpr::constant(cost.q) + w;
  const AffineExpr mid_left = AffineExpr::constant(Matrix::Identity(n, n)) + y.transpose() * sys.a;
  const AffineExpr bottom_left = sys.b.transpose() * pl;

  const AffineExpr lhs = block_matrix({
      {top_left, mid_left.transpose(), bottom_left.transpose()},
      {mid_left, x, AffineExpr(n, m)},
      {bottom_left, AffineExpr(m, n), AffineExpr::constant(cost.r)},
  });
  return AffineMatrixConstraint::from_expr("suboptimality", lhs, ConstraintSense::PositiveDefinite,
                                           strictness_margin(sys, epsilon));
}

/// M - M^T = 0 with M = A X - S Y, i.e. A X - X A^T - S Y + Y^T S = 0, which
/// makes (A - S P) X symmetric for P = Y X^-1. The skew matrix is embedded
/// as the symmetric [[0, K], [K^T, 0]] so the constraint stays symmetric.
inline AffineMatrixConstraint build_realness_constraint(const LtiSystem& sys,
                                                       const QuadraticCost& cost,
                                                       const VariableLayout& layout) {
  detail::check_problem_data(sys, cost);
  detail::require_design_blocks(sys, layout, {"X", "Y"});
  const Index n = sys.states();
  const Matrix s = input_weight(sys, cost);
  const AffineExpr x = layout.expr("X");
  const AffineExpr y = layout.expr("Y");
  const AffineExpr skew = sys.a * x - x * sys.a.transpose() - s * y + y.transpose() * s;
  const AffineExpr lhs = block_matrix({
      {AffineExpr(n, n), skew},
      {skew.transpose(), AffineExpr(n, n)},
  });
  return AffineMatrixConstraint::from_expr("realness", lhs, ConstraintSense::Zero, 0.0);
}

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Two entries of Y constrained to be equal.
struct EntryTie {
  Index row_a = 0;
  Index col_a = 0;
  Index row_b = 0;
  Index col_b = 0;
};

/// Sparsity of Y (false = pinned to zero), optional scalar X = xi*I, and
/// optional equalities between Y entries.
struct StructureSpec {
  Mask y_mask;
  bool x_scalar = false;
  std::vector<EntryTie> y_ties;

  static StructureSpec unstructured(Index n, bool x_scalar) {
    return {Mask::Constant(n, n, true), x_scalar, {}};
  }

  void validate(Index n) const {
    if (y_mask.rows() != n || y_mask.cols() != n) {
      throw Error(ErrorCode::DimensionMismatch, "y_mask must be " + std::to_string(n) + "x" +
                                                    std::to_string(n));
    }
    for (Index i = 0; i < n; ++i) {
      if (!y_mask.row(i).any()) {
        throw Error(ErrorCode::InvalidArgument,
                    "y_mask row " + std::to_string(i) + " has no free entry");
      }
    }
    for (const auto& t : y_ties) {
      for (Index v : {t.row_a, t.col_a, t.row_b, t.col_b}) {
        if (v < 0 || v >= n) throw Error(ErrorCode::DimensionMismatch, "tie entry out of range");
      }
    }
  }
};

namespace detail {

inline AffineMatrixConstraint scalar_equality(std::string name,
                                              std::vector<std::pair<Index, double>> terms) {
  AffineExpr e(1, 1);
  for (const auto& [k, c] : terms) e.add_term(k, Matrix::Constant(1, 1, c));
  return AffineMatrixConstraint::from_expr(std::move(name), e, ConstraintSense::Zero, 0.0);
}

inline std::string entry(Index i, Index j) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

}  // namespace detail

/// Equality pins for a structure spec: masked Y entries to zero, X diagonal
/// with equal entries when x_scalar, and the requested Y ties. Entry names
/// use 1-based indices.
inline std::vector<AffineMatrixConstraint> apply_structure(const VariableLayout& layout,
                                                           const StructureSpec& spec) {
  const auto& yb = layout.block("Y");
  const auto& xb = layout.block("X");
  if (spec.y_mask.rows() != yb.rows || spec.y_mask.cols() != yb.cols || xb.rows != yb.rows) {
    throw Error(ErrorCode::DimensionMismatch, "structure does not match the variable layout");
  }
  for (const auto& t : spec.y_ties) {
    for (Index v : {t.row_a, t.col_a, t.row_b, t.col_b}) {
      if (v < 0 || v >= yb.rows) throw Error(ErrorCode::DimensionMismatch, "tie entry out of range");
    }
  }
  std::vector<AffineMatrixConstraint> out;
  const Index n = yb.rows;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (!spec.y_mask(i, j)) {
        out.push_back(detail::scalar_equality("pin Y" + detail::entry(i, j),
                                              {{layout.index("Y", i, j), 1.0}}));
      }
    }
  }
  if (spec.x_scalar) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        out.push_back(detail::scalar_equality("scalar X off-diagonal" + detail::entry(i, j),
                                              {{layout.index("X", i, j), 1.0}}));
      }
    }
    for (Index i = 1; i < n; ++i) {
      out.push_back(detail::scalar_equality(
          "scalar X diagonal" + detail::entry(i, i),
          {{layout.index("X", i, i), 1.0}, {layout.index("X", 0, 0), -1.0}}));
    }
  }
  for (const auto& t : spec.y_ties) {
    out.push_back(detail::scalar_equality(
        "tie Y" + detail::entry(t.row_a, t.col_a) + " = Y" + detail::entry(t.row_b, t.col_b),
        {{layout.index("Y", t.row_a, t.col_a), 1.0}, {layout.index("Y", t.row_b, t.col_b), -1.0}}));
  }
  return out;
}

}  // namespace asymlyap
