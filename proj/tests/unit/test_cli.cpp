// Copyright 2026 The HClip Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hclip/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace hclip {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result Invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = parse_and_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hclip_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string Path(const std::string& n) const { return (dir_ / n).string(); }
  fs::path dir_;
};

TEST_F(CliTest, NoArgumentsPrintsUsage) {
  const Result r = Invoke({});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(CliTest, UnknownSubcommandRejected) {
  EXPECT_EQ(Invoke({"optimize"}).code, 1);
  EXPECT_EQ(Invoke({"run", "--no-such-flag", "1"}).code, 1);
}

TEST_F(CliTest, CalibrateExample) {
  const Result r = Invoke({"calibrate", "--lambda", "1", "--epsilon", "1", "--K", "100", "--delta", "1e-5"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("seed = 0"), std::string::npos);
  EXPECT_NE(r.out.find("sigma_omega = 136.22277117528"), std::string::npos);
}

TEST_F(CliTest, CalibrateJson) {
  const Result r = Invoke({"calibrate", "--lambda", "2", "--epsilon", "1", "--K", "100", "--json", "--seed", "9"});
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["sigma_omega"].get<double>(), 2 * 136.22277117528623, 1e-9);
  EXPECT_EQ(j["seed"], 9);
}

TEST_F(CliTest, CalibrateNeedsEpsilon) {
  const Result r = Invoke({"calibrate", "--lambda", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("epsilon"), std::string::npos);
}

TEST_F(CliTest, RegimesRowOne) {
  const Result r = Invoke({"regimes", "--L", "1", "--R", "1", "--sigma", "1", "--lambda", "5", "--alpha",
                        "1.5", "--K", "1000", "--beta", "0.1"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("regime = 1\n"), std::string::npos);
  EXPECT_NE(r.out.find("to exact optimum"), std::string::npos);
}

TEST_F(CliTest, RegimesWithPrivacyShowsBranches) {
  const Result r = Invoke({"regimes", "--L", "1", "--R", "1", "--sigma", "1", "--lambda", "5", "--epsilon",
                        "1", "--d", "10", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.contains("dp_optimal_lambda"));
  EXPECT_LE(j["dp_optimal_lambda"]["small"].get<double>(), 4.0 / 3.0);
}

TEST_F(CliTest, RegimesRejectPrivacyNoise) {
  const Result r = Invoke({"regimes", "--L", "1", "--R", "1", "--sigma", "1", "--lambda", "5",
                        "--sigma_omega", "0.5"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("tables-not-applicable"), std::string::npos);
}

TEST_F(CliTest, StepsizeReference) {
  const Result r = Invoke({"stepsize", "--L", "1", "--R", "1", "--sigma", "1", "--alpha", "2", "--K", "999",
                        "--lambda", "4", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j["gamma_full"].get<double>(), 1.1904761904761904762e-5, 1e-16);
  EXPECT_EQ(j["binding_full"], 2);
  EXPECT_EQ(j["parts"][2], "inf");
}

TEST_F(CliTest, TypeErrorsNameTheField) {
  Result r = Invoke({"run", "--K", "ten"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("K:"), std::string::npos);
  r = Invoke({"run", "--set", "experiment.trials=-3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("experiment.trials"), std::string::npos);
  r = Invoke({"run", "--set", "problem.colour=red"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("problem.colour: unknown field"), std::string::npos);
  r = Invoke({"run", "--experiment.timestamp", "maybe"});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  std::ofstream(Path("c.json")) << R"({"schema": "hclip-v1", "K": 50, "problem": {"kind": "nonconvex", "d": 3},
                                     "experiment.trials": 7})";
  const Result r = Invoke({"run", "--config", Path("c.json"), "--K", "60", "--set", "problem.d=5", "--dry-run"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["K"], 60);
  EXPECT_EQ(j["problem"]["kind"], "nonconvex");
  EXPECT_EQ(j["problem"]["d"], 5);
  EXPECT_EQ(j["experiment"]["trials"], 7);
  EXPECT_EQ(j["schema"], "hclip-v1");
}

TEST_F(CliTest, BadConfigFile) {
  std::ofstream(Path("bad.json")) << R"({"schema": "hclip-v1", "K": "many"})";
  Result r = Invoke({"run", "--config", Path("bad.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("K: expected"), std::string::npos);
  std::ofstream(Path("v0.json")) << R"({"schema": "hclip-v0"})";
  EXPECT_EQ(Invoke({"run", "--config", Path("v0.json")}).code, 1);
  EXPECT_EQ(Invoke({"run", "--config", Path("missing.json")}).code, 1);
}

TEST_F(CliTest, RunWritesByteStableOutput) {
  const std::vector<std::string> base = {"run", "--lambda", "4", "--K", "300", "--set", "experiment.trials=6",
                                         "--seed", "5", "--no-timestamp"};
  auto with_out = [&](const std::string& name) {
    auto a = base;
    a.push_back("--experiment.output");
    a.push_back(Path(name));
    return Invoke(a);
  };
  const Result a = with_out("a.csv");
  const Result b = with_out("b.csv");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(Slurp(Path("a.csv")), Slurp(Path("b.csv")));
  EXPECT_EQ(load_records(Path("a.csv")).size(), 6u);
  EXPECT_NE(a.out.find("seed = 5"), std::string::npos);
}

TEST_F(CliTest, RunJsonFormat) {
  const Result r = Invoke({"run", "--lambda", "2", "--K", "100", "--set", "experiment.trials=4", "--json",
                        "--experiment.format", "json", "--experiment.output", Path("r.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["trials"], 4);
  const auto file = nlohmann::json::parse(Slurp(Path("r.json")));
  EXPECT_EQ(file["schema"], "hclip-v1");
  EXPECT_EQ(file["config"]["lambda"], 2.0);
}

TEST_F(CliTest, DivergedExperimentExitsTwo) {
  const Result r = Invoke({"run", "--lambda", "1e15", "--step_rule", "fixed", "--gamma", "50", "--noise.kind",
                        "none", "--K", "100", "--set", "experiment.trials=4"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("diverged"), std::string::npos);
}

TEST_F(CliTest, SweepReportsRateFit) {
  const Result r = Invoke({"sweep", "--lambda", "4", "--set", "experiment.trials=3", "--set",
                        "experiment.K_grid=10,30,100,1000", "--step_rule", "fixed", "--gamma", "0.1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("raw_slope"), std::string::npos);
  EXPECT_NE(r.out.find("\n1000,4,"), std::string::npos);
}

TEST_F(CliTest, VerifyLemmaSmallGrid) {
  const Result r = Invoke({"verify-lemma", "--lemma.n_samples", "2000", "--lemma.alphas", "1.5",
                        "--lemma.lambda_over_sigma", "1,2", "--lemma.output", Path("lemma.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rows = 10"), std::string::npos);
  const std::string csv = Slurp(Path("lemma.csv"));
  EXPECT_EQ(csv.substr(0, 11), "alpha,lambd");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}

TEST_F(CliTest, VerifyLemmaToStdout) {
  const Result r = Invoke({"verify-lemma", "--lemma.n_samples", "1000", "--lemma.alphas", "[2.0]",
                        "--lemma.lambda_over_sigma", "[1]", "--lemma.x_over_lambda", "[0]"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, 6), "alpha,");
  EXPECT_NE(r.err.find("seed = 0"), std::string::npos);
}

TEST(WorkersTest, EnvironmentFallback) {
  ::setenv("HCLIP_WORKERS", "3", 1);
  EXPECT_EQ(resolve_workers(0), 3u);
  EXPECT_EQ(resolve_workers(5), 5u);
  ::setenv("HCLIP_WORKERS", "zero", 1);
  EXPECT_GE(resolve_workers(0), 1u);
  ::unsetenv("HCLIP_WORKERS");
}

}  // namespace
}  // namespace hclip
