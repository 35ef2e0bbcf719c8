#include <gtest/gtest.h>

#include "asymlyap/lmi.hpp"
#include "asymlyap/sdpsolve.hpp"
#include "support/generators.hpp"

using namespace asymlyap;

namespace {

void expect_sound(const std::vector<AffineMatrixConstraint>& cs, const FeasibilityResult& r, double feas_tol) {
  ASSERT_TRUE(r.assignment.has_value());
  for (const auto& c : cs) {
    EXPECT_TRUE(c.satisfied(*r.assignment, feas_tol)) << c.name << " achieved " << c.achieved(*r.assignment);
  }
}

void expect_monotone(const FeasibilityResult& r) {
  for (std::size_t i = 1; i < r.slack_history.size(); ++i) EXPECT_LE(r.slack_history[i], r.slack_history[i - 1]);
}

}  // namespace

TEST(SolveFeasibility, PositiveDefiniteSymmetricVariable) {
  VariableLayout layout;
  layout.add_symmetric("X", 2);
  const std::vector<AffineMatrixConstraint> cs{
      AffineMatrixConstraint::from_expr("X >= margin", layout.expr("X"), ConstraintSense::PositiveDefinite, 1e-3)};
  const auto r = solve_feasibility(cs, layout);
  EXPECT_EQ(r.status, FeasibilityStatus::Feasible);
  EXPECT_LT(r.slack, 0.0);
  expect_sound(cs, r, 1e-7);
  expect_monotone(r);
}

TEST(SolveFeasibility, ContradictoryScalarBounds) {
  VariableLayout layout;
  layout.add_general("v", 1, 1);
  AffineExpr v(2, 2);
  v.add_term(0, Matrix::Identity(2, 2));
  const AffineExpr one = AffineExpr::constant(Matrix::Identity(2, 2));
  const std::vector<AffineMatrixConstraint> cs{
      AffineMatrixConstraint::from_expr("v >= 1", v - one, ConstraintSense::PositiveDefinite, 0.0),
      AffineMatrixConstraint::from_expr("-v >= 1", -v - one, ConstraintSense::PositiveDefinite, 0.0)};
  const auto r = solve_feasibility(cs, layout);
  EXPECT_EQ(r.status, FeasibilityStatus::Infeasible);
  EXPECT_FALSE(r.assignment.has_value());
  EXPECT_NEAR(r.slack, 1.0, 1e-6);
  expect_monotone(r);
}

TEST(SolveFeasibility, InconsistentEqualities) {
  VariableLayout layout;
  layout.add_general("v", 1, 2);
  AffineExpr a(1, 1), b(1, 1);
  a.add_term(0, Matrix::Ones(1, 1));
  a.add_term(1, Matrix::Ones(1, 1));
  b = a - AffineExpr::constant(Matrix::Ones(1, 1));
  const std::vector<AffineMatrixConstraint> cs{
      AffineMatrixConstraint::from_expr("v1 + v2 = 0", a, ConstraintSense::Zero, 0.0),
      AffineMatrixConstraint::from_expr("v1 + v2 = 1", b, ConstraintSense::Zero, 0.0)};
  EXPECT_EQ(solve_feasibility(cs, layout).status, FeasibilityStatus::Infeasible);
}

TEST(SolveFeasibility, EqualitiesThroughNullSpace) {
  // X symmetric 2x2 with x11 + x22 = 3 (not a pin or alias) and X >= I.
  VariableLayout layout;
  layout.add_symmetric("X", 2);
  AffineExpr trace(1, 1);
  trace.add_term(layout.index("X", 0, 0), Matrix::Ones(1, 1));
  trace.add_term(layout.index("X", 1, 1), Matrix::Ones(1, 1));
  const std::vector<AffineMatrixConstraint> cs{
      AffineMatrixConstraint::from_expr("trace = 3", trace - AffineExpr::constant(3.0 * Matrix::Ones(1, 1)),
                                        ConstraintSense::Zero, 0.0),
      AffineMatrixConstraint::from_expr("X >= I", layout.expr("X") - AffineExpr::constant(Matrix::Identity(2, 2)),
                                        ConstraintSense::PositiveDefinite, 0.0)};
  const auto r = solve_feasibility(cs, layout);
  ASSERT_EQ(r.status, FeasibilityStatus::Feasible);
  expect_sound(cs, r, 1e-7);
  const Matrix x = layout.extract("X", *r.assignment);
  EXPECT_NEAR(x.trace(), 3.0, 1e-12);
  // The analytic center of {X >= I, trace 3} is 1.5 I.
  EXPECT_NEAR((x - 1.5 * Matrix::Identity(2, 2)).norm(), 0.0, 1e-4);
}

TEST(SolveFeasibility, PinsAreExact) {
  VariableLayout layout;
  layout.add_general("Y", 2, 2);
  AffineExpr pin(1, 1);
  pin.add_term(layout.index("Y", 0, 1), Matrix::Ones(1, 1));
  const std::vector<AffineMatrixConstraint> cs{
      AffineMatrixConstraint::from_expr("pin", pin, ConstraintSense::Zero, 0.0),
      AffineMatrixConstraint::from_expr("Y + Y^T > 0", layout.expr("Y") + layout.expr("Y").transpose(),
                                        ConstraintSense::PositiveDefinite, 1e-3)};
  const auto r = solve_feasibility(cs, layout);
  ASSERT_EQ(r.status, FeasibilityStatus::Feasible);
  EXPECT_EQ(layout.extract("Y", *r.assignment)(0, 1), 0.0);
}

TEST(SolveFeasibility, ObjectivePhaseKeepsMargins) {
  VariableLayout layout;
  layout.add_symmetric("X", 2);
  const std::vector<AffineMatrixConstraint> cs{
      AffineMatrixConstraint::from_expr("X >= I", layout.expr("X") - AffineExpr::constant(Matrix::Identity(2, 2)),
                                        ConstraintSense::PositiveDefinite, 0.0)};
  FeasibilityOptions opts;
  opts.objective = Vector::Zero(layout.dimension());
  (*opts.objective)(layout.index("X", 0, 0)) = 1.0;
  (*opts.objective)(layout.index("X", 1, 1)) = 1.0;
  const auto r = solve_feasibility(cs, layout, opts);
  ASSERT_EQ(r.status, FeasibilityStatus::Feasible);
  const Matrix x = layout.extract("X", *r.assignment);
  // Minimizing the trace drives X toward I from inside.
  EXPECT_NEAR(x.trace(), 2.0, 1e-5);
  EXPECT_GE(min_eig_sym(x) - 1.0, -1e-7);
}

TEST(SolveFeasibility, InvalidInputs) {
  VariableLayout layout;
  layout.add_general("v", 1, 1);
  EXPECT_THROW(solve_feasibility({}, layout), Error);
  AffineMatrixConstraint bad;
  bad.name = "bad";
  bad.constant = Matrix::Zero(1, 1);
  bad.coefficients.emplace_back(5, Matrix::Ones(1, 1));
  const std::vector<AffineMatrixConstraint> cs{bad};
  EXPECT_THROW(solve_feasibility(cs, layout), Error);
}

TEST(SolveFeasibility, CustomBackendIsUsedThroughInterface) {
  struct Refuse final : FeasibilityBackend {
    FeasibilityResult solve(std::span<const AffineMatrixConstraint>, const VariableLayout&,
                            const FeasibilityOptions&) const override {
      FeasibilityResult r;
      r.status = FeasibilityStatus::NumericalTrouble;
      r.message = "refused";
      return r;
    }
  };
  VariableLayout layout;
  layout.add_symmetric("X", 1);
  const std::vector<AffineMatrixConstraint> cs{
      AffineMatrixConstraint::from_expr("X", layout.expr("X"), ConstraintSense::PositiveDefinite, 0.0)};
  const Refuse backend;
  const FeasibilityBackend& base = backend;
  EXPECT_EQ(base.solve(cs, layout, {}).status, FeasibilityStatus::NumericalTrouble);
}

TEST(SolveFeasibilityProperty, RandomSystemsAreSoundDeterministicMonotone) {
  gen::Source src(501);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = src.size(1, 3);
    const Index m = src.size(1, 2);
    LtiSystem sys{src.gaussian(n, n), src.gaussian(n, m)};
    QuadraticCost cost{src.positive_definite(n), src.positive_definite(m)};
    const auto layout = VariableLayout::for_design(n);
    std::vector<AffineMatrixConstraint> cs{build_stability_lmi(sys, cost, layout),
                                           build_suboptimality_lmi(sys, cost, layout),
                                           AffineMatrixConstraint::from_expr("W", layout.expr("W"),
                                                                             ConstraintSense::PositiveDefinite, 1e-6)};
    FeasibilityOptions opts;
    opts.variable_bound = 1e3;
    const auto r1 = solve_feasibility(cs, layout, opts);
    const auto r2 = solve_feasibility(cs, layout, opts);
    EXPECT_EQ(r1.status, r2.status);
    EXPECT_EQ(r1.slack, r2.slack);
    if (r1.assignment) {
      EXPECT_EQ(*r1.assignment, *r2.assignment);
    }
    EXPECT_NE(r1.status, FeasibilityStatus::NumericalTrouble) << r1.message;
    if (r1.feasible()) expect_sound(cs, r1, opts.feas_tol);
    expect_monotone(r1);
  }
}
