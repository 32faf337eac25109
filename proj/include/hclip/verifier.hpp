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

// Monte Carlo check of the bias and variance bounds for a clipped estimator.
// For X = x + xi with E|xi|^alpha <= sigma^alpha and X_hat = clip(X, lambda):
//
//   |E X_hat - x_hat|      <= c s S^{(a-1)/a} / l^{a-1} + max(|x|, l/2) c S / l^a + m
//   E|X_hat - E X_hat|^2   <= 9 (c + 1) / 4 * l^{2-a} (s^a + m^a)
//
// where x_hat = clip(x, l/2), c = 2^{2a-1}, m = max(0, |x| - l/2), S = s^a + m^a.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "hclip/clipping.hpp"
#include "hclip/error.hpp"
#include "hclip/numkit.hpp"
#include "hclip/oracles.hpp"
#include "hclip/parallel.hpp"

namespace hclip {

struct LemmaScenario {
  Vector x{0.0};
  NoiseModel noise = make_zero_noise(1);
  double lambda = 1.0;
  std::uint64_t n_samples = 1000000;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  void validate() const {
    require_same_dim(noise.d, x.size(), "lemma scenario");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw Error(ErrorCode::kInvalidParams, "lemma scenario: lambda must be positive");
    }
    if (n_samples < 1000) {
      throw Error(ErrorCode::kInvalidParams, "lemma scenario: n_samples must be >= 1000");
    }
  }
};

namespace detail {

inline double lemma_excess(double x_norm, double lambda) {
  return std::max(0.0, x_norm - lambda / 2.0);
}

}  // namespace detail

inline double lemma_bias_bound(double alpha, double sigma, double x_norm, double lambda) {
  const double m = detail::lemma_excess(x_norm, lambda);
  const double c = std::pow(2.0, 2.0 * alpha - 1.0);
  const double S = std::pow(sigma, alpha) + std::pow(m, alpha);
  return c * sigma * std::pow(S, (alpha - 1.0) / alpha) / std::pow(lambda, alpha - 1.0) +
         std::max(x_norm, lambda / 2.0) * c * S / std::pow(lambda, alpha) + m;
}

inline double lemma_variance_bound(double alpha, double sigma, double x_norm, double lambda) {
  const double m = detail::lemma_excess(x_norm, lambda);
  const double k = 9.0 * (std::pow(2.0, 2.0 * alpha - 1.0) + 1.0) / 4.0;
  return k * std::pow(lambda, 2.0 - alpha) * (std::pow(sigma, alpha) + std::pow(m, alpha));
}

inline double lemma_bias_bound(const LemmaScenario& s) {
  return lemma_bias_bound(s.noise.alpha, s.noise.sigma(), norm(s.x), s.lambda);
}

inline double lemma_variance_bound(const LemmaScenario& s) {
  return lemma_variance_bound(s.noise.alpha, s.noise.sigma(), norm(s.x), s.lambda);
}

struct ClippedMoments {
  double bias_norm = 0.0;
  double variance = 0.0;
  double band_bias = 0.0;  // bootstrap 99% half-widths
  double band_var = 0.0;
};

inline constexpr std::size_t kBootstrapResamples = 500;
inline constexpr std::size_t kBootstrapBlocks = 1000;
inline constexpr std::uint64_t kBootstrapStreamTag = 0xB0075742ULL;

// Draws n samples X = x + xi via sample(rng, xi_out), clips each at lambda and
// compares against x_hat = clip(x, lambda / 2). Bands come from a block
// bootstrap: the n draws are cut into contiguous blocks whose sums are
// resampled with replacement, which keeps 500 resamples cheap at n = 1e6.
template <typename Sampler>
ClippedMoments estimate_clipped_moments(const Vector& x, double lambda, std::uint64_t n,
                                        RngStream& rng, Sampler&& sample) {
  const std::size_t d = x.size();
  const ClipLevel level(lambda);
  const Vector x_hat = clip(x, ClipLevel(lambda / 2.0));
  const std::size_t blocks = static_cast<std::size_t>(std::min<std::uint64_t>(kBootstrapBlocks, n));

  // Per block: sum of D = X_hat - x_hat (d entries) and sum of |D|^2.
  std::vector<double> block_sum(blocks * d, 0.0), block_sq(blocks, 0.0);
  std::vector<std::uint64_t> block_n(blocks, 0);
  std::vector<double> xi(d);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t b = static_cast<std::size_t>(i * blocks / n);
    sample(rng, std::span<double>(xi));
    for (std::size_t j = 0; j < d; ++j) xi[j] += x[j];
    clip_inplace(xi, level.value());
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double dj = xi[j] - x_hat[j];
      block_sum[b * d + j] += dj;
      sq += dj * dj;
    }
    block_sq[b] += sq;
    ++block_n[b];
  }

  auto stats = [&](const std::vector<std::size_t>& pick) {
    std::vector<double> sum(d, 0.0);
    double sq = 0.0, cnt = 0.0;
    for (std::size_t b : pick) {
      for (std::size_t j = 0; j < d; ++j) sum[j] += block_sum[b * d + j];
      sq += block_sq[b];
      cnt += static_cast<double>(block_n[b]);
    }
    double mean_sq = 0.0;
    for (double& v : sum) {
      v /= cnt;
      mean_sq += v * v;
    }
    // E|D|^2 - |E D|^2 equals the variance of X_hat.
    return std::pair<double, double>{std::sqrt(mean_sq), std::max(0.0, sq / cnt - mean_sq)};
  };

  std::vector<std::size_t> pick(blocks);
  for (std::size_t b = 0; b < blocks; ++b) pick[b] = b;
  const auto [bias, var] = stats(pick);

  RngStream boot = rng.fork(kBootstrapStreamTag);
  std::vector<double> dev_bias(kBootstrapResamples), dev_var(kBootstrapResamples);
  for (std::size_t r = 0; r < kBootstrapResamples; ++r) {
    for (auto& p : pick) p = static_cast<std::size_t>(boot() % blocks);
    const auto [bb, bv] = stats(pick);
    dev_bias[r] = std::abs(bb - bias);
    dev_var[r] = std::abs(bv - var);
  }
  auto q99 = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(v.size())));
    return v[std::max<std::size_t>(k, 1) - 1];
  };
  return {bias, var, q99(dev_bias), q99(dev_var)};
}

inline ClippedMoments estimate_clipped_moments(const LemmaScenario& s) {
  s.validate();
  RngStream rng(s.seed, s.stream_id);
  return estimate_clipped_moments(s.x, s.lambda, s.n_samples, rng,
                                  [&](RngStream& r, std::span<double> out) {
                                    sample_noise(s.noise, r, out);
                                  });
}

struct LemmaRow {
  double alpha = 0.0;
  double lambda = 0.0;
  double x_norm = 0.0;
  double sigma_alpha = 0.0;
  ClippedMoments empirical;
  double bound_bias = 0.0;
  double bound_var = 0.0;
  double slack = 0.0;  // min over bias and variance of bound + band - empirical
  bool pass = false;
};

inline LemmaRow evaluate_lemma_row(const LemmaScenario& s) {
  LemmaRow row;
  row.alpha = s.noise.alpha;
  row.lambda = s.lambda;
  row.x_norm = norm(s.x);
  row.sigma_alpha = s.noise.sigma_alpha;
  row.empirical = estimate_clipped_moments(s);
  row.bound_bias = lemma_bias_bound(s);
  row.bound_var = lemma_variance_bound(s);
  const double sb = row.bound_bias + row.empirical.band_bias - row.empirical.bias_norm;
  const double sv = row.bound_var + row.empirical.band_var - row.empirical.variance;
  row.slack = std::min(sb, sv);
  row.pass = sb >= 0.0 && sv >= 0.0;
  return row;
}

// Rows are independent; each scenario carries its own stream.
inline std::vector<LemmaRow> sweep_lemma(const std::vector<LemmaScenario>& grid,
                                         std::size_t workers = 0) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidParams, "sweep_lemma: empty grid");
  for (const auto& s : grid) s.validate();
  std::vector<LemmaRow> rows(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t i) { rows[i] = evaluate_lemma_row(grid[i]); });
  return rows;
}

struct LemmaGridSpec {
  std::vector<double> alphas{1.2, 1.5, 2.0};
  std::vector<double> lambda_over_sigma{0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> x_over_lambda{0.0, 0.25, 0.5, 1.0, 4.0};
  std::size_t d = 4;
  std::uint64_t n_samples = 1000000;
  std::uint64_t seed = 0;
  double scale = 1.0;
  double tail_gap = 0.5;  // Pareto tail index is alpha + tail_gap
};

// Symmetric Pareto noise per alpha; x lies along (1, ..., 1) / sqrt(d).
// Scenario i gets stream id i.
inline std::vector<LemmaScenario> lemma_grid(const LemmaGridSpec& spec) {
  if (spec.d == 0) throw Error(ErrorCode::kInvalidDimension, "lemma grid: d must be >= 1");
  std::vector<LemmaScenario> grid;
  const Vector dir = (1.0 / std::sqrt(static_cast<double>(spec.d))) * Vector::Filled(spec.d, 1.0);
  for (double a : spec.alphas) {
    const NoiseModel noise = make_pareto_noise(a, a + spec.tail_gap, spec.scale, spec.d);
    const double sigma = noise.sigma();
    for (double lr : spec.lambda_over_sigma) {
      for (double xr : spec.x_over_lambda) {
        LemmaScenario s;
        s.lambda = lr * sigma;
        s.x = (xr * s.lambda) * dir;
        s.noise = noise;
        s.n_samples = spec.n_samples;
        s.seed = spec.seed;
        s.stream_id = grid.size();
        grid.push_back(std::move(s));
      }
    }
  }
  return grid;
}

inline void write_lemma_csv(const std::vector<LemmaRow>& rows, std::ostream& out) {
  out << "alpha,lambda,x_norm,sigma_alpha,emp_bias,bound_bias,emp_var,bound_var,band_bias,"
         "band_var,pass\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  r.alpha, r.lambda, r.x_norm, r.sigma_alpha, r.empirical.bias_norm, r.bound_bias,
                  r.empirical.variance, r.bound_var, r.empirical.band_bias, r.empirical.band_var,
                  r.pass ? 1 : 0);
    out << buf;
  }
}

}  // namespace hclip
