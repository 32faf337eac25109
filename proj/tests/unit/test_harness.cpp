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

#include "hclip/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

namespace hclip {
namespace {

namespace fs = std::filesystem;

TEST(QuantileTest, Examples) {
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 1.0);
  EXPECT_EQ(quantile(v, 0.8), 8.0);
  EXPECT_EQ(quantile(v, 0.999), 10.0);
  EXPECT_EQ(quantile(v, 0.01), 1.0);
  EXPECT_EQ(quantile(std::vector<double>(7, 2.5), 0.37), 2.5);
  EXPECT_THROW(quantile({}, 0.5), Error);
  EXPECT_THROW(quantile({1.0}, 1.0), Error);
}

TEST(QuantileTest, MonotoneInLevel) {
  RngStream rng(1, 0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(1 + rng() % 40);
    for (double& x : v) x = rng.uniform01();
    double prev = -1.0;
    for (double l = 0.01; l < 1.0; l += 0.01) {
      const double q = quantile(v, l);
      EXPECT_GE(q, prev);
      prev = q;
    }
  }
}

ExperimentConfig SmallExperiment() {
  ExperimentConfig c;
  c.problem = make_quadratic(4, linear_spectrum(4, 0.1, 1.0), Vector::Zeros(4));
  c.noise = make_pareto_noise(1.5, 2.5, 1.0, 4);
  c.x0 = 0.5 * Vector::Filled(4, 1.0);
  c.theory = theory_for(c.problem, c.noise, c.x0, 4.0, 500, 0.1);
  c.trials = 8;
  c.seed = 42;
  c.workers = 2;
  return c;
}

TEST(RunTrialsTest, SingleTrialIsOneRun) {
  ExperimentConfig c = SmallExperiment();
  c.trials = 1;
  const auto recs = run_trials(c);
  ASSERT_EQ(recs.size(), 1u);
  RunConfig rc;
  rc.problem = c.problem;
  rc.noise = c.noise;
  rc.lambda = ClipLevel(4.0);
  rc.gamma = stepsize_full(c.theory).gamma;
  rc.K = 500;
  rc.seed = 42;
  const RunRecord direct = run(rc, c.x0);
  EXPECT_EQ(recs[0].best_suboptimality, direct.best_suboptimality);
  EXPECT_EQ(recs[0].gamma, direct.gamma);
}

TEST(RunTrialsTest, DeterministicAndSchedulingFree) {
  ExperimentConfig c = SmallExperiment();
  const auto a = run_trials(c);
  const auto b = run_trials(c);
  c.workers = 1;
  const auto serial = run_trials(c);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].trial, i);
    EXPECT_EQ(a[i].best_suboptimality, b[i].best_suboptimality);
    EXPECT_EQ(a[i].best_suboptimality, serial[i].best_suboptimality);
    EXPECT_EQ(*a[i].final_x, *serial[i].final_x);
  }
  EXPECT_NE(a[0].best_suboptimality, a[1].best_suboptimality);
}

TEST(RunTrialsTest, MostlyDivergedAborts) {
  ExperimentConfig c = SmallExperiment();
  c.noise = make_zero_noise(4, 1.5);
  c.step_rule = StepRule::kFixed;
  c.gamma = 50.0;
  c.theory.lambda = 1e15;  // no clipping before the divergence radius
  try {
    run_trials(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kExperimentFailed);
  }
}

TEST(RunTrialsTest, FixedRuleNeedsGamma) {
  ExperimentConfig c = SmallExperiment();
  c.step_rule = StepRule::kFixed;
  EXPECT_THROW(run_trials(c), Error);
  c.K_grid = {10, 10};
  c.gamma = 0.1;
  EXPECT_THROW(run_trials(c), Error);
}

TEST(RunTrialsTest, PrivacyCalibratedPerPoint) {
  ExperimentConfig c = SmallExperiment();
  PrivacyTarget t;
  t.epsilon = 10.0;
  c.privacy = t;
  const auto recs = run_trials(c, 300, 2.0);
  t.K = 300;
  EXPECT_DOUBLE_EQ(recs[0].sigma_omega, calibrate_sigma_omega(t, ClipLevel(2.0)));
}

TEST(CheckBoundTest, NoiselessIsDeterministicAndPasses) {
  ExperimentConfig c = SmallExperiment();
  c.noise = make_zero_noise(4, 1.5);
  c.theory = theory_for(c.problem, c.noise, c.x0, 4.0, 500, 0.1);
  const auto recs = run_trials(c);
  const QuantileSummary s = check_bound(recs, c.theory, recs[0].gamma);
  EXPECT_EQ(s.values.front(), s.values.back());
  EXPECT_EQ(s.quantile_value, s.values.front());
  EXPECT_TRUE(s.pass);
  EXPECT_EQ(s.statistic_name, "best_suboptimality");
  EXPECT_DOUBLE_EQ(s.level, 0.9);
  ASSERT_TRUE(s.containment);
  EXPECT_EQ(*s.containment, 1.0);
}

TEST(CheckBoundTest, OversizedStepStillWellFormed) {
  ExperimentConfig c = SmallExperiment();
  c.step_rule = StepRule::kFixed;
  c.gamma = stepsize_full(c.theory).gamma * 1e3;
  const auto recs = run_trials(c);
  const QuantileSummary s = check_bound(recs, c.theory, *c.gamma);
  EXPECT_EQ(s.values.size(), 8u);
  EXPECT_TRUE(std::is_sorted(s.values.begin(), s.values.end()));
  EXPECT_GT(s.bound, 0.0);
}

TEST(CheckBoundTest, RejectsMixedOrMismatched) {
  ExperimentConfig c = SmallExperiment();
  auto recs = run_trials(c);
  const double g = recs[0].gamma;
  EXPECT_THROW(check_bound(recs, c.theory, 2 * g), Error);
  EXPECT_THROW(check_bound({}, c.theory, g), Error);
  recs[3].lambda = 5.0;
  EXPECT_THROW(check_bound(recs, c.theory, g), Error);
}

TEST(CheckBoundTest, NonconvexStatistic) {
  ExperimentConfig c;
  c.problem = make_nonconvex_smooth(3, 1.0);
  c.noise = make_student_t_noise(1.5, 3.0, 0.3, 3);
  c.x0 = Vector::Filled(3, 1.0);
  c.theory = theory_for(c.problem, c.noise, c.x0, 3.0, 200, 0.2);
  c.trials = 4;
  const auto recs = run_trials(c);
  const QuantileSummary s = check_bound(recs, c.theory, recs[0].gamma);
  EXPECT_EQ(s.statistic_name, "best_grad_norm_sq");
  EXPECT_FALSE(s.containment);
  EXPECT_TRUE(s.pass);
}

TEST(RateFitTest, Preconditions) {
  EXPECT_THROW(fit_rate({10, 100, 1000}, {3, 2, 1}), Error);
  EXPECT_THROW(fit_rate({10, 20, 30, 40}, {4, 3, 2, 1}), Error);
  EXPECT_THROW(fit_rate({10, 100, 100, 1000}, {4, 3, 2, 1}), Error);
  ExperimentConfig c = SmallExperiment();
  c.K_grid = {10, 100, 1000};
  EXPECT_THROW(rate_fit(c), Error);
}

TEST(RateFitTest, SyntheticPowerLaws) {
  const std::vector<std::uint64_t> K = {100, 1000, 10000, 100000};
  std::vector<double> q;
  for (auto k : K) q.push_back(3.0 / static_cast<double>(k));
  const RateFit f = fit_rate(K, q);
  EXPECT_NEAR(f.raw.slope, -1.0, 1e-12);
  EXPECT_NEAR(f.raw.r2, 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(f.floored.slope));
  EXPECT_TRUE(f.diagnostic.empty());
}

TEST(RateFitTest, NonpositiveDifferenceGivesNan) {
  const RateFit f = fit_rate({100, 1000, 10000, 100000}, {1.0, 0.5, 0.2, 0.3});
  EXPECT_TRUE(std::isnan(f.floored.slope));
  EXPECT_NE(f.diagnostic.find("K=10000"), std::string::npos);
  EXPECT_TRUE(std::isfinite(f.raw.slope));
}

// Gradient descent on a quadratic with log-spaced curvature: the gap decays
// like 1/K over the grid.
TEST(RateFitTest, NoiselessGradientDescentRate) {
  const std::size_t d = 200;
  std::vector<double> eig(d);
  for (std::size_t i = 0; i < d; ++i) eig[i] = std::pow(10.0, -8.0 + 8.0 * static_cast<double>(i) / (d - 1));
  ExperimentConfig c;
  c.problem = make_quadratic(d, eig, Vector::Zeros(d));
  c.noise = make_zero_noise(d, 2.0);
  c.x0 = Vector::Filled(d, 1.0);
  c.theory = theory_for(c.problem, c.noise, c.x0, 1e9, 100, 0.1);
  c.step_rule = StepRule::kFixed;
  c.gamma = 0.1;
  c.trials = 1;
  c.K_grid = {100, 1000, 10000, 100000};
  const RateFit f = rate_fit(c);
  EXPECT_NEAR(f.raw.slope, -1.0, 0.1);
  EXPECT_GT(f.raw.r2, 0.99);
}

TEST(SweepTest, CartesianGrid) {
  ExperimentConfig c = SmallExperiment();
  c.trials = 3;
  c.K_grid = {50, 100};
  c.lambda_grid = {1.0, 2.0, 4.0};
  const auto cells = sweep(c);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[4].K, 100u);
  EXPECT_EQ(cells[4].lambda, 2.0);
  EXPECT_EQ(cells[4].records.size(), 3u);
  EXPECT_EQ(cells[4].summary.K, 100u);
}

class PersistTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hclip_persist_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string Path(const std::string& name) const { return (dir_ / name).string(); }

  static std::vector<RunRecord> Records() {
    auto recs = run_trials(SmallExperiment());
    recs[2].diverged = true;
    recs[2].best_suboptimality = std::numeric_limits<double>::infinity();
    recs[2].best_grad_norm_sq = std::numeric_limits<double>::infinity();
    return recs;
  }

  fs::path dir_;
};

void ExpectSameScalars(const RunRecord& a, const RunRecord& b) {
  EXPECT_EQ(a.trial, b.trial);
  EXPECT_EQ(a.K, b.K);
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ(a.gamma, b.gamma);
  EXPECT_EQ(a.sigma_omega, b.sigma_omega);
  EXPECT_EQ(a.best_suboptimality, b.best_suboptimality);
  EXPECT_EQ(a.best_grad_norm_sq, b.best_grad_norm_sq);
  EXPECT_EQ(a.max_dist_to_opt, b.max_dist_to_opt);
  EXPECT_EQ(a.diverged, b.diverged);
  EXPECT_EQ(a.wall_time, b.wall_time);
}

TEST_F(PersistTest, CsvRoundTrip) {
  const auto recs = Records();
  persist(recs, Path("r.csv"), "csv");
  const auto back = load_records(Path("r.csv"));
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) ExpectSameScalars(recs[i], back[i]);
}

TEST_F(PersistTest, JsonRoundTrip) {
  const auto recs = Records();
  PersistOptions opt;
  opt.config_echo = {{"seed", 42}};
  persist(recs, Path("r.json"), "json", opt);
  const auto back = load_records(Path("r.json"));
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) ExpectSameScalars(recs[i], back[i]);
  std::ifstream in(Path("r.json"));
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["schema"], "hclip-v1");
  EXPECT_EQ(j["config"]["seed"], 42);
}

TEST_F(PersistTest, EmptyIsHeaderOnly) {
  PersistOptions opt;
  opt.timestamp = false;
  persist({}, Path("e.csv"), "csv", opt);
  std::ifstream in(Path("e.csv"));
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), std::string(kRecordCsvHeader) + "\n");
  EXPECT_TRUE(load_records(Path("e.csv")).empty());
}

TEST_F(PersistTest, StableWithoutTimestamp) {
  PersistOptions opt;
  opt.timestamp = false;
  persist(run_trials(SmallExperiment()), Path("a.csv"), "csv", opt);
  persist(run_trials(SmallExperiment()), Path("b.csv"), "csv", opt);
  std::ifstream a(Path("a.csv")), b(Path("b.csv"));
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().find("# created"), std::string::npos);
}

TEST_F(PersistTest, Errors) {
  EXPECT_THROW(persist({}, Path("x.txt"), "parquet"), Error);
  try {
    persist({}, Path("missing/dir/x.csv"), "csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("missing/dir/x.csv"), std::string::npos);
  }
  EXPECT_THROW(load_records(Path("nope.csv")), Error);
}

}  // namespace
}  // namespace hclip
