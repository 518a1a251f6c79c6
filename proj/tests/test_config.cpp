#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mfglab/config.hpp"
#include "mfglab/errors.hpp"
#include "mfglab/runner.hpp"

using namespace mfglab;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

nlohmann::json run_text(const std::string& text, const std::string& name) {
  ExperimentConfig cfg = parse_config_text(text);
  fs::path dir = fs::path(::testing::TempDir()) / name;
  fs::create_directories(dir);
  nlohmann::json summary;
  std::ostringstream log;
  run_experiment(cfg, dir.string(), 1, summary, log);
  return summary;
}

bool all_passed(const nlohmann::json& summary) {
  for (const auto& c : summary["checks"])
    if (!c["passed"].get<bool>()) return false;
  return !summary["checks"].empty();
}

}  // namespace

TEST(Config, MinimalSolveEchoesDefaults) {
  ExperimentConfig c = parse_config_text("kind: solve\n");
  EXPECT_EQ(c.kind, ExperimentKind::Solve);
  EXPECT_EQ(c.doc["solver"]["theta"].get<double>(), 0.5);
  EXPECT_EQ(c.doc["solver"]["picard_tol"].get<double>(), 1e-8);
  EXPECT_EQ(c.doc["grid"]["counts"][0].get<int>(), 64);
  EXPECT_EQ(c.doc["coefficients"]["a11"].get<std::string>(), "1");
  EXPECT_EQ(c.doc["seed"].get<int>(), 0);
}

TEST(Config, MisspelledKeyIsNamed) {
  std::string msg = error_of("kind: solve\nsolver: {thetta: 0.5}\ngird: {}\n");
  EXPECT_NE(msg.find("solver.thetta"), std::string::npos) << msg;
  EXPECT_NE(msg.find("gird"), std::string::npos) << msg;
}

TEST(Config, LambdaDefaultsToOneInEstimateSweep) {
  ExperimentConfig c = parse_config_text("kind: estimate-sweep\nexact: {u: \"x*t\"}\n");
  EXPECT_EQ(c.doc["weights"]["lambda"].get<double>(), 1.0);
  EXPECT_EQ(c.doc["weights"]["s"].size(), 5u);
}

TEST(Config, MissingRequiredKeysNameTheKind) {
  std::string msg = error_of("kind: manufacture\nexact: {u: \"x\"}\n");
  EXPECT_NE(msg.find("manufacture"), std::string::npos) << msg;
  EXPECT_NE(msg.find("exact.v"), std::string::npos) << msg;
  EXPECT_NE(error_of("kind: inverse-source\n").find("source.f1"), std::string::npos);
  EXPECT_NE(error_of("seed: 1\n").find("kind"), std::string::npos);
  EXPECT_NE(error_of("kind: sweep\n").find("unknown experiment kind"), std::string::npos);
}

TEST(Config, BadValuesAreConfigErrors) {
  EXPECT_NE(error_of("kind: solve\ncoefficients: {a11: \"sin(\"}\n"), "");
  EXPECT_NE(error_of("kind: solve\ncoefficients: {a3: 1}\n").find("coefficients.a3"), std::string::npos);
  EXPECT_NE(error_of("kind: solve\nobserved: [y1]\n"), "");
  EXPECT_NE(error_of("kind: solve\nsolver: {theta: 2}\n"), "");
  EXPECT_NE(error_of("kind: solve\ncoefficients: {a11: -1}\n"), "");
  EXPECT_NE(error_of("kind: solve\n: [\n"), "");
}

TEST(Config, RobinDataAcceptsSideMaps) {
  ExperimentConfig c = parse_config_text("kind: solve\ndata: {g: {x1: \"t\"}}\n");
  auto sides = side_exprs(c.doc["data"]["g"]);
  EXPECT_EQ(sides[static_cast<int>(Side::X1)].eval(0, 0, 0.5), 0.5);
  EXPECT_TRUE(sides[static_cast<int>(Side::X0)].is_zero());
  EXPECT_NE(error_of("kind: solve\ndata: {g: {x2: 1}}\n").find("data.g.x2"), std::string::npos);
}

TEST(Config, HashIgnoresOutputAndTracksContent) {
  ExperimentConfig a = parse_config_text("kind: solve\noutput: {dir: a}\n");
  ExperimentConfig b = parse_config_text("kind: solve\noutput: {dir: b}\n");
  ExperimentConfig c = parse_config_text("kind: solve\nseed: 3\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  // Reference vector of 64-bit FNV-1a.
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Config, QuotedScalarsStayStrings) {
  ExperimentConfig c = parse_config_text("kind: solve\ndata: {F: \"2\"}\n");
  EXPECT_TRUE(c.doc["data"]["F"].is_string());
}

TEST(Runner, EstimateSweepOnZeroFieldsPassesTrivially) {
  auto s = run_text(
      "kind: estimate-sweep\ngrid: {counts: [17], nt: 33}\nexact: {u: \"0\", v: \"0\"}\n"
      "estimates: [{name: lemma1}, {name: lemma2, m: 1}]\n",
      "zero_sweep");
  EXPECT_TRUE(all_passed(s)) << s["checks"].dump();
}

TEST(Runner, OperatorIdentityAtSZeroReducesToBareOperator) {
  auto s = run_text(
      "kind: operator-identity\ngrid: {counts: [17], T: 4, nt: 65}\nweights: {s: [0]}\n"
      "checks: {min_order: 1.8, max_s0_error: 1.0e-10}\n",
      "identity_s0");
  EXPECT_TRUE(all_passed(s)) << s["checks"].dump();
  EXPECT_LT(s["results"]["s0_deviation"].get<double>(), 1e-10);
}

TEST(Runner, WeightCheckWritesProvenance) {
  auto s = run_text("kind: weight-check\ngrid: {counts: [17], nt: 33}\nseed: 9\n", "weights");
  EXPECT_TRUE(all_passed(s)) << s["checks"].dump();
  std::ifstream in(fs::path(::testing::TempDir()) / "weights" / "weight_bounds.csv");
  std::string first;
  std::getline(in, first);
  EXPECT_NE(first.find("config_hash"), std::string::npos);
  EXPECT_NE(first.find("seed: 9"), std::string::npos);
}

TEST(Runner, ExitCodesFollowTheFailureKind) {
  fs::path dir = fs::path(::testing::TempDir()) / "exit_codes";
  fs::create_directories(dir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };
  RunOptions o;
  o.out_dir = (dir / "out").string();
  EXPECT_EQ(run(write("bad.yaml", "kind: solve\nbogus: 1\n"), o), kExitConfig);
  EXPECT_EQ(run(write("missing.yaml", "kind: manufacture\n"), o), kExitConfig);
  EXPECT_EQ(run(write("ok.yaml", "kind: weight-check\ngrid: {counts: [17], nt: 33}\n"), o), kExitPass);
  // Positivity floor of the inverse problem: an invariant violation.
  EXPECT_EQ(run(write("floor.yaml",
                      "kind: inverse-source\ngrid: {counts: [17], nt: 33}\n"
                      "source: {f1: 1, q1: \"x - 0.5\"}\ninverse: {tasks: [reconstruct]}\n"),
                o),
            kExitInvariant);
  std::ifstream in(dir / "out" / "summary.json");
  auto s = nlohmann::json::parse(in);
  EXPECT_EQ(s["failure"]["type"], "invariant_violation");
  // Picard budget too small: a solver failure.
  EXPECT_EQ(run(write("picard.yaml",
                      "kind: solve\ngrid: {counts: [17], nt: 33}\ncoefficients: {c0: 0.5, k0: 0.5}\n"
                      "solver: {picard_max: 1, picard_tol: 1.0e-14}\ndata: {F: \"x\", G: \"t\"}\n"),
                o),
            kExitSolver);
}
