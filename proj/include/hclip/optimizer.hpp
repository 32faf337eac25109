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

// DP-Clipped-SGD:
//   g_hat = clip(grad f(x) + xi, lambda),  omega ~ N(0, sigma_omega^2 I),
//   x <- x - gamma (g_hat + omega).
// K updates are performed; minima are taken over the K + 1 points x^0..x^K.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hclip/clipping.hpp"
#include "hclip/error.hpp"
#include "hclip/numkit.hpp"
#include "hclip/oracles.hpp"
#include "hclip/privacy.hpp"
#include "hclip/schedule.hpp"

namespace hclip {

enum class RecordLevel { kNone, kScalars, kFull };

inline RecordLevel ParseRecordLevel(const std::string& s) {
  if (s == "none") return RecordLevel::kNone;
  if (s == "scalars") return RecordLevel::kScalars;
  if (s == "full") return RecordLevel::kFull;
  throw Error(ErrorCode::kInvalidConfig, "unknown record level '" + s + "'");
}

// Tag used to derive the privacy-noise stream from the oracle stream.
inline constexpr std::uint64_t kDpStreamTag = 0x44504E4F495345ULL;

// Norm above which an iterate counts as diverged.
inline constexpr double kDivergenceRadius = 1e12;

struct RunConfig {
  ProblemSpec problem;
  NoiseModel noise;
  ClipLevel lambda = ClipLevel::Unclipped();
  double gamma = 0.0;
  std::uint64_t K = 1;
  double sigma_omega = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  RecordLevel record = RecordLevel::kNone;

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      throw Error(ErrorCode::kInvalidParams, "gamma must be positive and finite");
    }
    if (K == 0) throw Error(ErrorCode::kInvalidParams, "K must be >= 1");
    if (!(sigma_omega >= 0.0) || !std::isfinite(sigma_omega)) {
      throw Error(ErrorCode::kInvalidParams, "sigma_omega must be finite and >= 0");
    }
    require_same_dim(noise.d, problem.dim, "run noise");
  }
};

// Per-iterate diagnostics; index t covers x^t for t = 0..K. Update-side
// quantities (theta, clip flag, |g_hat|) are indexed by the step k = 0..K-1.
struct StepTrace {
  std::vector<double> f;
  std::vector<double> grad_norm;
  std::vector<double> theta_norm;
  std::vector<double> ghat_norm;
  std::vector<std::uint8_t> clipped;
};

struct RunRecord {
  std::uint64_t trial = 0;
  std::uint64_t K = 0;
  double lambda = 0.0;
  double gamma = 0.0;
  double sigma_omega = 0.0;
  double best_suboptimality = 0.0;
  double best_grad_norm_sq = 0.0;
  double max_dist_to_opt = std::numeric_limits<double>::quiet_NaN();  // NaN without x*
  bool diverged = false;
  std::int64_t diverged_step = -1;
  std::optional<StepTrace> per_step;
  std::optional<Vector> final_x;
  double wall_time = 0.0;
  std::uint64_t oracle_words = 0;  // stream positions after the run
  std::uint64_t dp_words = 0;
};

inline RunRecord run(const RunConfig& config, const Vector& x0) {
  config.validate();
  const ProblemSpec& p = config.problem;
  require_same_dim(x0.size(), p.dim, "run x0");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t d = p.dim;
  const double lambda = config.lambda.value();
  const bool clipping = !config.lambda.unclipped();
  const bool full = config.record == RecordLevel::kFull;

  RngStream oracle_rng(config.seed, config.stream_id);
  RngStream dp_rng = oracle_rng.fork(kDpStreamTag);

  std::vector<double> x = x0.entries(), g(d), s(d), omega(d, 0.0);
  const std::vector<double>* xs = p.x_star ? &p.x_star->entries() : nullptr;

  RunRecord rec;
  rec.trial = config.stream_id;
  rec.K = config.K;
  rec.lambda = lambda;
  rec.gamma = config.gamma;
  rec.sigma_omega = config.sigma_omega;
  rec.best_suboptimality = std::numeric_limits<double>::infinity();
  rec.best_grad_norm_sq = std::numeric_limits<double>::infinity();
  if (xs) rec.max_dist_to_opt = 0.0;
  if (config.record != RecordLevel::kNone) {
    rec.per_step.emplace();
    rec.per_step->f.reserve(config.K + 1);
    rec.per_step->grad_norm.reserve(config.K + 1);
  }

  auto observe = [&]() {
    p.gradient(x, g);
    const double fx = p.objective(x);
    const double gn = norm(std::span<const double>(g));
    rec.best_suboptimality = std::min(rec.best_suboptimality, fx - p.f_star);
    rec.best_grad_norm_sq = std::min(rec.best_grad_norm_sq, gn * gn);
    if (xs) {
      double ss = 0.0;
      for (std::size_t i = 0; i < d; ++i) ss += (x[i] - (*xs)[i]) * (x[i] - (*xs)[i]);
      rec.max_dist_to_opt = std::max(rec.max_dist_to_opt, std::sqrt(ss));
    }
    if (rec.per_step) {
      rec.per_step->f.push_back(fx);
      rec.per_step->grad_norm.push_back(gn);
    }
    return gn;
  };

  double gn = observe();
  for (std::uint64_t k = 0; k < config.K; ++k) {
    sample_noise(config.noise, oracle_rng, s);
    for (std::size_t i = 0; i < d; ++i) s[i] += g[i];
    const double factor = clipping ? clip_inplace(s, lambda) : 1.0;
    if (full) {
      const double c = clipping ? clip_factor_c(gn, config.lambda) : 1.0;
      double tn = 0.0;
      for (std::size_t i = 0; i < d; ++i) tn += (s[i] - c * g[i]) * (s[i] - c * g[i]);
      rec.per_step->theta_norm.push_back(std::sqrt(tn));
      rec.per_step->ghat_norm.push_back(norm(std::span<const double>(s)));
      rec.per_step->clipped.push_back(factor < 1.0 ? 1 : 0);
    }
    if (config.sigma_omega > 0.0) fill_gaussian(dp_rng, config.sigma_omega, omega);
    bool finite = true;
    double xn2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      x[i] -= config.gamma * (s[i] + omega[i]);
      finite = finite && std::isfinite(x[i]);
      xn2 += x[i] * x[i];
    }
    if (!finite || !(std::sqrt(xn2) <= kDivergenceRadius)) {
      throw DivergedError(static_cast<std::size_t>(k + 1),
                          "iterate left the ball of radius 1e12 or became non-finite");
    }
    gn = observe();
  }

  rec.final_x = Vector(x);
  rec.oracle_words = oracle_rng.position();
  rec.dp_words = dp_rng.position();
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

// Theory parameters implied by a problem, noise model and start point.
inline TheoryParams theory_for(const ProblemSpec& problem, const NoiseModel& noise,
                               const Vector& x0, double lambda, std::uint64_t K, double beta) {
  TheoryParams t;
  t.L = problem.L;
  t.radius = initial_gap(problem, x0);
  t.sigma = noise.sigma();
  t.alpha = noise.alpha;
  t.K = K;
  t.beta = beta;
  t.lambda = lambda;
  t.d = problem.dim;
  t.convex = problem.convex;
  return t;
}

struct TheoryRun {
  RunRecord record;
  StepSize step;
  double gamma = 0.0;
  double sigma_omega = 0.0;
  double bound = 0.0;
};

// Step size from the full theorem, sigma_omega from `privacy` when given.
inline TheoryRun run_with_theory(TheoryParams params, const ProblemSpec& problem,
                                 const NoiseModel& noise, const Vector& x0, std::uint64_t seed,
                                 const std::optional<PrivacyTarget>& privacy = std::nullopt,
                                 std::uint64_t stream_id = 0) {
  params.validate();
  if (params.convex != problem.convex) {
    throw Error(ErrorCode::kInvalidParams, "theory convexity flag does not match the problem");
  }
  if (params.L < problem.L) {
    throw Error(ErrorCode::kInvalidParams, "theory L is below the problem's smoothness constant");
  }
  const double gap = initial_gap(problem, x0);
  if (params.radius < gap * (1.0 - 1e-12)) {
    throw Error(ErrorCode::kInvalidParams,
                std::string(problem.convex ? "R" : "Delta") + " is below the initial gap " +
                    std::to_string(gap));
  }
  if (privacy) {
    if (privacy->K != params.K) {
      throw Error(ErrorCode::kInvalidTarget, "privacy target K differs from the run's K");
    }
    params.sigma_omega = calibrate_sigma_omega(*privacy, ClipLevel(params.lambda));
  }
  TheoryRun out;
  out.step = stepsize_full(params);
  out.gamma = out.step.gamma;
  out.sigma_omega = params.sigma_omega;
  RunConfig cfg;
  cfg.problem = problem;
  cfg.noise = noise;
  cfg.lambda = ClipLevel(params.lambda);
  cfg.gamma = out.gamma;
  cfg.K = params.K;
  cfg.sigma_omega = params.sigma_omega;
  cfg.seed = seed;
  cfg.stream_id = stream_id;
  out.record = run(cfg, x0);
  out.bound = theory_bound(params, out.gamma);
  return out;
}

}  // namespace hclip
