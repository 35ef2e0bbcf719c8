#include <limits>
#include <string>

#include <gtest/gtest.h>

#include "asymlyap/io.hpp"
#include "support/generators.hpp"

using namespace asymlyap;
namespace aio = asymlyap::io;

namespace {

const char* kExample = R"({
  "system": {"A": [[1, 2], [0, 2]], "B": [[4, 2], [0, 2]]},
  "cost": {"Q": [[10, 0], [0, 10]], "R": [[0.05, 0], [0, 0.05]]},
  "x0": [0.1, -0.2],
  "solver": {"epsilon": 1e-6, "feas_tol": 1e-7}
})";

ErrorCode parse_error(const std::string& text) {
  try {
    aio::parse_problem(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "parsed: " << text;
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(ParseProblem, DesignFile) {
  const auto f = aio::parse_problem(kExample);
  ASSERT_TRUE(f.design.has_value());
  EXPECT_FALSE(f.consensus.has_value());
  EXPECT_EQ(f.source, kExample);
  Matrix a(2, 2);
  a << 1, 2, 0, 2;
  EXPECT_EQ(f.design->sys.a, a);
  EXPECT_EQ(f.design->cost.r(1, 1), 0.05);
  EXPECT_EQ(f.design->x0(1), -0.2);
  EXPECT_EQ(f.design->tolerances.epsilon, 1e-6);
  EXPECT_FALSE(f.design->structure.has_value());
  EXPECT_FALSE(f.solver.w_cap.has_value());
}

TEST(ParseProblem, StructureWithOneBasedTies) {
  const auto f = aio::parse_problem(R"({
    "system": {"A": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "B": [[1, -1, 0, 0], [0, 1, -1, 0], [0, 0, 1, -1]]},
    "cost": {"Q": [[10, 0, 0], [0, 10, 0], [0, 0, 10]],
             "R": [[0.01, 0, 0, 0], [0, 0.01, 0, 0], [0, 0, 0.01, 0], [0, 0, 0, 0.01]]},
    "x0": [-0.1, 0.4, 0.2],
    "structure": {"y_mask": [[1, true, 0], [0, 1, 0], [0, 0, 1]], "x_scalar": true, "y_ties": [[1, 1, 1, 2]]}
  })");
  ASSERT_TRUE(f.design && f.design->structure);
  const auto& s = *f.design->structure;
  EXPECT_TRUE(s.y_mask(0, 1));
  EXPECT_FALSE(s.y_mask(1, 0));
  ASSERT_EQ(s.y_ties.size(), 1u);
  EXPECT_EQ(s.y_ties[0].row_b, 0);
  EXPECT_EQ(s.y_ties[0].col_b, 1);
}

TEST(ParseProblem, ConsensusFile) {
  const auto f = aio::parse_problem(
      R"({"consensus": {"n_agents": 4, "agent_pole": 1, "q_weight": 10, "r_weight": 0.01,
                        "initial_states": [0.9, 1.0, 0.6, 0.4]}})");
  ASSERT_TRUE(f.consensus.has_value());
  EXPECT_EQ(f.consensus->n_agents, 4);
  EXPECT_EQ(f.consensus->initial_states(2), 0.6);
}

TEST(ParseProblem, Errors) {
  EXPECT_EQ(parse_error("{"), ErrorCode::ParseError);
  EXPECT_EQ(parse_error("[1, 2]"), ErrorCode::ParseError);
  EXPECT_EQ(parse_error(R"({"system": {"A": [[1, 2], [0]], "B": [[1], [1]]},
                            "cost": {"Q": [[1, 0], [0, 1]], "R": [[1]]}, "x0": [1, 1]})"),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_error(R"({"system": {"A": [[1]], "B": [[1]]}, "cost": {"Q": [[1]]}, "x0": [1]})"),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_error(R"({"system": {"A": [["x"]], "B": [[1]]}, "cost": {"Q": [[1]], "R": [[1]]}, "x0": [1]})"),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_error(R"({"consensus": {"n_agents": 2.5, "agent_pole": 1, "q_weight": 1, "r_weight": 1,
                                          "initial_states": [1, 2]}})"),
            ErrorCode::ParseError);
  EXPECT_EQ(parse_error(R"({"system": {"A": [[1]], "B": [[1]]}, "cost": {"Q": [[1]], "R": [[1]]}, "x0": [1],
                            "structure": {"y_mask": [[1]], "y_ties": [[1, 1]]}})"),
            ErrorCode::ParseError);
}

TEST(ParseGain, ExactlyOneMatrix) {
  const auto g = aio::parse_gain(R"({"P": [[1, 0], [0, 1]]})");
  ASSERT_TRUE(g.p.has_value());
  EXPECT_FALSE(g.k.has_value());
  EXPECT_THROW(aio::parse_gain(R"({"P": [[1]], "K": [[1]]})"), Error);
  EXPECT_THROW(aio::parse_gain(R"({})"), Error);
}

TEST(ToJson, NonFiniteBecomesNull) {
  EXPECT_TRUE(aio::number_or_null(std::numeric_limits<double>::infinity()).is_null());
  EXPECT_EQ(aio::number_or_null(1.5).get<double>(), 1.5);
}

TEST(ToJsonProperty, MatricesRoundTripBitExact) {
  gen::Source src(801);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = 1e3 * src.gaussian(src.size(1, 5), src.size(1, 5));
    const auto text = aio::to_json(m).dump();
    EXPECT_EQ(aio::parse_matrix(aio::json::parse(text), "M"), m);
  }
}

TEST(RoundTrip, EchoedProblemReproducesCertificate) {
  const auto f = aio::parse_problem(kExample);
  const auto first = design_suboptimal(*f.design);
  aio::json report = {{"input", f.source}, {"certificate", aio::to_json(first)}};
  const auto again = aio::parse_problem(aio::json::parse(report.dump(2))["input"].get<std::string>());
  EXPECT_EQ(again.source, f.source);
  const auto second = design_suboptimal(*again.design);
  EXPECT_EQ(aio::to_json(second).dump(), report["certificate"].dump());
}
