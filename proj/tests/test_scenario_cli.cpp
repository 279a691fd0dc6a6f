#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "searchlight/cli.hpp"
#include "searchlight_builtin_scenarios.hpp"

using namespace searchlight;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = SEARCHLIGHT_SCENARIO_DIR;

std::string scenario_path(const std::string& name) { return kScenarios + "/" + name + ".json"; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("searchlight_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SEARCHLIGHT_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string* header = nullptr) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

const char* kMinimal = R"({
  "version": 1,
  "name": "minimal",
  "space": {"type": "discrete", "cells": 2},
  "prior": {"type": "pmf", "weights": [0.5, 0.5]},
  "detection": {"type": "exponential", "rate": 1},
  "schedule": {"type": "linear", "rate": 1},
  "truth": {"cell": 1},
  "plan": {"type": "optimal"},
  "time": {"start": 0, "end": 5, "samples": 11}
})";

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  if (pos == std::string::npos) throw std::runtime_error("fixture does not contain " + from);
  return text.replace(pos, from.size(), to);
}

}  // namespace

TEST(ScenarioParse, MinimalDocument) {
  const auto c = parse_scenario(kMinimal);
  EXPECT_EQ(c.name, "minimal");
  EXPECT_EQ(c.space.size(), 2u);
  EXPECT_EQ(c.truth.index(), 0u);
  EXPECT_EQ(c.time.samples, 11u);
  EXPECT_EQ(c.plan.type, PlanRequest::Type::optimal);
  EXPECT_FALSE(c.alternative.has_value());
}

TEST(ScenarioParse, PmfSummingToMoreThanOneIsRejected) {
  const auto text = replace(kMinimal, "[0.5, 0.5]", "[0.6, 0.6]");
  EXPECT_THROW(parse_scenario(text), ValidationError);
}

TEST(ScenarioParse, UnknownKeysAreRejected) {
  EXPECT_THROW(parse_scenario(replace(kMinimal, "\"version\": 1,", "\"version\": 1, \"colour\": 3,")),
               ValidationError);
  EXPECT_THROW(parse_scenario(replace(kMinimal, "\"rate\": 1}", "\"rate\": 1, \"gain\": 2}")), ValidationError);
}

TEST(ScenarioParse, WrongVersionIsRejected) {
  EXPECT_THROW(parse_scenario(replace(kMinimal, "\"version\": 1", "\"version\": 2")), ValidationError);
}

TEST(ScenarioParse, SyntaxErrorReportsLineAndColumn) {
  const auto text = replace(kMinimal, "\"cells\": 2}", "\"cells\": 2,,}");
  try {
    parse_scenario(text, "broken.json");
    FAIL() << "expected a parse error";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("broken.json:4:"), std::string::npos) << msg;
  }
}

TEST(ScenarioParse, TruthMustLieInTheSpace) {
  EXPECT_THROW(parse_scenario(replace(kMinimal, "\"cell\": 1", "\"cell\": 3")), ValidationError);
}

TEST(ScenarioParse, InvalidTimeRange) {
  EXPECT_THROW(parse_scenario(replace(kMinimal, "\"end\": 5", "\"end\": -1")), ValidationError);
}

TEST(ScenarioParse, MixtureWeightsMustSumToOne) {
  const auto text = replace(kMinimal, R"({"type": "pmf", "weights": [0.5, 0.5]})",
                            R"({"type": "mixture", "components": [{"type": "pmf", "weights": [1, 0]},
                                {"type": "pmf", "weights": [0, 1]}], "weights": [0.5, 0.6]})");
  EXPECT_THROW(parse_scenario(text), ValidationError);
}

TEST(BundledScenarios, GaussianExampleParameters) {
  const auto c = load_scenario(scenario_path("example4"));
  const auto* g = c.prior.get_if<Gaussian2D>();
  ASSERT_NE(g, nullptr);
  EXPECT_EQ(g->sigma, 2.0);
  EXPECT_EQ(c.schedule.kind(), EffortSchedule::Kind::linear);
  EXPECT_EQ(c.schedule.rate(), 1.0);
  EXPECT_EQ(c.truth.location()[0], 0.0);
  EXPECT_EQ(c.truth.location()[1], 0.0);
}

TEST(BundledScenarios, TwoPointCompositeParameters) {
  const auto c = load_scenario(scenario_path("example7"));
  const auto* m = c.prior.get_if<Mixture>();
  ASSERT_NE(m, nullptr);
  ASSERT_EQ(m->components.size(), 2u);
  EXPECT_EQ(m->components[0].get_if<DiscretePmf>()->weights[0], 0.99);
  EXPECT_EQ(m->components[1].get_if<DiscretePmf>()->weights[0], 0.17);
  EXPECT_EQ(m->weights[0], 0.75);
  EXPECT_NEAR(c.detection.rate(c.space.site(0)), 0.3, 0.0);
}

TEST(BundledScenarios, EmbeddedCopiesMatchFiles) {
  std::size_t count = 0;
  for (const auto& [name, text] : builtin_scenarios()) {
    EXPECT_EQ(text, read_file(scenario_path(name))) << name;
    EXPECT_NO_THROW(parse_scenario(text, name)) << name;
    ++count;
  }
  EXPECT_EQ(count, 12u);
}

TEST(Cli, MeanTimeOfTwoCellUniform) {
  const auto dir = fresh_dir("mean");
  ASSERT_EQ(run_cli("mean-time " + scenario_path("example1") + " --out " + dir.string()), exit_ok);
  const auto j = nlohmann::json::parse(read_file(dir / "example1_mean_time.json"));
  EXPECT_NEAR(j["plan"]["mu"]["value"].get<double>(), 2.0, 1e-6);
  EXPECT_NEAR(j["plan"]["mu_true"]["value"].get<double>(), 2.0, 1e-6);
  EXPECT_EQ(j["rng"], "mt19937_64");
  fs::remove_all(dir);
}

TEST(Cli, DivergentMeanTimeExitCode) {
  const auto dir = fresh_dir("div");
  EXPECT_EQ(run_cli("mean-time " + scenario_path("counterexample6") + " --out " + dir.string()), exit_divergent);
  EXPECT_EQ(run_cli("mean-time " + scenario_path("counterexample6") + " --allow-divergent --out " + dir.string()),
            exit_ok);
  const auto j = nlohmann::json::parse(read_file(dir / "counterexample6_mean_time.json"));
  EXPECT_TRUE(j["divergent"].get<bool>());
  fs::remove_all(dir);
}

TEST(Cli, ValidationFailureExitCode) {
  const auto dir = fresh_dir("invalid");
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << replace(kMinimal, "[0.5, 0.5]", "[0.6, 0.6]");
  EXPECT_EQ(run_cli("curves " + bad.string() + " --out " + dir.string()), exit_validation);
  EXPECT_EQ(run_cli("bogus " + bad.string()), exit_validation);
  EXPECT_EQ(run_cli("compare " + scenario_path("example1") + " --out " + dir.string()), exit_validation);
  EXPECT_FALSE(fs::exists(dir / "minimal_curves.csv"));
  fs::remove_all(dir);
}

TEST(Cli, CurvesHeaderAndTwoCellGap) {
  const auto dir = fresh_dir("curves");
  ASSERT_EQ(run_cli("curves " + scenario_path("example5") + " --out " + dir.string()), exit_ok);
  std::string header;
  const auto rows = read_csv(dir / "example5_curves.csv", &header);
  EXPECT_EQ(header, "t,P_subjective,P_true,P_subjective_alt,P_true_alt");
  ASSERT_FALSE(rows.empty());
  for (const auto& r : rows) {
    const double e = std::log(4.0) + r[0];
    EXPECT_NEAR(r[1] - r[3], (1.0 - 2.0 * std::numbers::sqrt2 / 3.0) * std::exp(-e / 2.0), 1e-10);
  }
  EXPECT_TRUE(fs::exists(dir / "example5_curves.json"));
  fs::remove_all(dir);
}

TEST(Cli, PlanSnapshots) {
  const auto dir = fresh_dir("plan");
  ASSERT_EQ(run_cli("plan " + scenario_path("example1") + " --out " + dir.string()), exit_ok);
  std::string header;
  const auto rows = read_csv(dir / "example1_plan.csv", &header);
  EXPECT_EQ(header, "t,cell,x,y,effort");
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& r : rows) EXPECT_NEAR(r[4], r[0] / 2.0, 1e-12);
  const auto j = nlohmann::json::parse(read_file(dir / "example1_plan.json"));
  EXPECT_TRUE(j["feasible"].get<bool>());
  fs::remove_all(dir);
}

TEST(Cli, CompareGaussianMixturePaperMode) {
  const auto dir = fresh_dir("compare");
  ASSERT_EQ(run_cli("compare " + scenario_path("example8") + " --paper-mode --out " + dir.string()), exit_ok);
  std::string header;
  const auto rows = read_csv(dir / "example8_compare.csv", &header);
  EXPECT_EQ(header, "t,P_subjective,P_true,P_subjective_alt,P_true_alt,P_true_difference");
  // Fit k in P# = 1 - exp(-k sqrt(t/pi)) at a late sample.
  const auto& r = rows.back();
  const double root = std::sqrt(r[0] / std::numbers::pi);
  EXPECT_NEAR(-std::log1p(-r[2]) / root, 1.0 / std::sqrt(2.125), 1e-3);
  EXPECT_NEAR(-std::log1p(-r[4]) / root, 1.25, 1e-3);
  const auto j = nlohmann::json::parse(read_file(dir / "example8_compare.json"));
  EXPECT_EQ(j["composite_mode"], "moment_matched");
  EXPECT_TRUE(j["composite_plan_wins_everywhere"].get<bool>());
  fs::remove_all(dir);
}

TEST(Cli, CurvesAreByteIdenticalAcrossRuns) {
  const auto a = fresh_dir("det_a");
  const auto b = fresh_dir("det_b");
  ASSERT_EQ(run_cli("curves " + scenario_path("example2") + " --out " + a.string()), exit_ok);
  ASSERT_EQ(run_cli("curves " + scenario_path("example2") + " --out " + b.string()), exit_ok);
  EXPECT_EQ(read_file(a / "example2_curves.csv"), read_file(b / "example2_curves.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const auto dir = fresh_dir("env");
  ::setenv("SEARCHLIGHT_OUT_DIR", dir.string().c_str(), 1);
  EXPECT_EQ(default_out_dir(std::nullopt), dir);
  EXPECT_EQ(default_out_dir(std::string("elsewhere")), fs::path("elsewhere"));
  ::unsetenv("SEARCHLIGHT_OUT_DIR");
  EXPECT_EQ(default_out_dir(std::nullopt), fs::path("."));
  fs::remove_all(dir);
}

TEST(Cli, Fmt17RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 0.99899999835}) EXPECT_EQ(std::stod(detail::fmt17(v)), v);
}
