#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string problem(const std::string& name) { return std::string(ASYMLYAP_PROBLEMS) + "/" + name; }

int run(const std::string& args) {
  const std::string cmd = std::string("ASYMLYAP_LOG=quiet ") + ASYMLYAP_CLI + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "asymlyap_cli_tests";
  fs::create_directories(dir);
  return dir / name;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

}  // namespace

TEST(Cli, DesignUnstableExample) {
  const auto out = scratch("design.json");
  const auto csv = scratch("design.csv");
  ASSERT_EQ(run("design " + problem("unstable.json") + " --out " + out.string() + " --csv " + csv.string()), 0);
  const auto doc = read_json(out);
  EXPECT_TRUE(doc["verification"]["bound_ok"].get<bool>());
  EXPECT_LT(doc["verification"]["j_analytic"].get<double>(), doc["certificate"]["gamma_bar"].get<double>());
  std::ifstream in(problem("unstable.json"));
  std::stringstream original;
  original << in.rdbuf();
  EXPECT_EQ(doc["input"].get<std::string>(), original.str());
  std::ifstream trajectory(csv);
  std::string header;
  std::getline(trajectory, header);
  EXPECT_EQ(header, "t,x1,x2,cost_accum");
}

TEST(Cli, ReportRoundTripIsDeterministic) {
  const auto first = scratch("first.json");
  const auto echoed = scratch("echoed_problem.json");
  const auto second = scratch("second.json");
  ASSERT_EQ(run("design " + problem("unstable.json") + " --no-simulate --out " + first.string()), 0);
  {
    std::ofstream os(echoed);
    os << read_json(first)["input"].get<std::string>();
  }
  ASSERT_EQ(run("design " + echoed.string() + " --no-simulate --out " + second.string()), 0);
  EXPECT_EQ(read_json(first)["certificate"].dump(), read_json(second)["certificate"].dump());
}

TEST(Cli, DesignWithStructureFile) {
  EXPECT_EQ(run("design " + problem("chain_errors.json") + " --structure " + problem("chain_structure.json")), 0);
  EXPECT_EQ(run("design " + problem("chain_errors.json")), 0);
}

TEST(Cli, DesignStablePlantAndScalar) {
  EXPECT_EQ(run("design " + problem("stable.json")), 0);
  EXPECT_EQ(run("design " + problem("scalar.json")), 0);
}

TEST(Cli, InfeasibleIsExitTwo) { EXPECT_EQ(run("design " + problem("uncontrollable.json")), 2); }

TEST(Cli, RaggedMatrixIsParseError) { EXPECT_EQ(run("design " + problem("ragged.json")), 64); }

TEST(Cli, DimensionMismatchIsValidationError) { EXPECT_EQ(run("design " + problem("mismatch.json")), 65); }

TEST(Cli, UnknownFlagIsParseError) { EXPECT_EQ(run("design " + problem("unstable.json") + " --bogus"), 64); }

TEST(Cli, Riccati) {
  const auto out = scratch("riccati.json");
  ASSERT_EQ(run("riccati " + problem("unstable.json") + " --out " + out.string()), 0);
  EXPECT_NEAR(read_json(out)["riccati"]["j_star"].get<double>(), 0.0207, 5e-4);
  EXPECT_EQ(run("riccati " + problem("uncontrollable.json")), 2);
}

TEST(Cli, VerifyReferenceDesignMatrix) {
  const auto out = scratch("verify.json");
  ASSERT_EQ(run("verify " + problem("unstable.json") + " " + problem("reference_p.json") +
                " --gamma 1.1374 --out " + out.string()),
            0);
  const auto doc = read_json(out);
  EXPECT_TRUE(doc["verification"]["hurwitz"].get<bool>());
  EXPECT_NEAR(doc["verification"]["j_analytic"].get<double>(), 0.0627, 0.02 * 0.0627);
}

TEST(Cli, VerifyBoundViolationAndUnstableGain) {
  EXPECT_EQ(run("verify " + problem("unstable.json") + " " + problem("reference_p.json") + " --gamma 0.01"), 3);
  EXPECT_EQ(run("verify " + problem("unstable.json") + " " + problem("unstable_gain.json")), 2);
}

TEST(Cli, ConsensusReferenceInstance) {
  const auto out = scratch("consensus.json");
  const auto csv = scratch("agents.csv");
  ASSERT_EQ(run("consensus " + problem("consensus.json") + " --out " + out.string() + " --csv " + csv.string()), 0);
  const auto doc = read_json(out);
  EXPECT_TRUE(doc["protocol"]["structure_ok"].get<bool>());
  EXPECT_TRUE(doc["protocol"]["bound_ok"].get<bool>());
  EXPECT_LT(doc["protocol"]["disagreement_at_horizon"].get<double>(), 1e-3);
  std::ifstream trajectory(csv);
  std::string header;
  std::getline(trajectory, header);
  EXPECT_EQ(header, "t,x1,x2,x3,x4,cost_accum");
}

TEST(Cli, ConsensusFlags) {
  EXPECT_EQ(run("consensus --agents 4 --pole 1 --q 10 --r 0.01 --states 0.9 1.0 0.6 0.4"), 0);
  EXPECT_EQ(run("consensus --agents 2 --pole -1"), 0);
  EXPECT_EQ(run("consensus --agents 1"), 65);
  EXPECT_EQ(run("consensus " + problem("one_agent.json")), 65);
}
