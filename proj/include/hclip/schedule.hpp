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

// Step sizes, regime classification and high-probability bounds for
// clipped SGD with Gaussian privacy noise.
//
// Every formula is evaluated with its literal numeric constants. For convex
// problems `radius` is R >= |x0 - x*|; otherwise it is Delta >= f(x0) - f*.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hclip/error.hpp"
#include "hclip/privacy.hpp"

namespace hclip {

struct TheoryParams {
  double L = 1.0;
  double radius = 1.0;
  double sigma = 1.0;
  double alpha = 2.0;
  std::uint64_t K = 1000;
  double beta = 0.1;
  double lambda = 1.0;
  double sigma_omega = 0.0;
  std::uint64_t d = 1;
  bool convex = true;
  std::optional<double> eta;  // table offset; defaults to 1e-3 * scale()

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidParams, std::string(name) + " must be positive and finite");
      }
    };
    positive(L, "L");
    positive(radius, convex ? "R" : "Delta");
    positive(lambda, "lambda");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      throw Error(ErrorCode::kInvalidParams, "sigma must be finite and >= 0");
    }
    if (!(alpha > 1.0 && alpha <= 2.0)) {
      throw Error(ErrorCode::kInvalidParams, "alpha must lie in (1, 2]");
    }
    if (K == 0) throw Error(ErrorCode::kInvalidParams, "K must be >= 1");
    if (!(beta > 0.0 && beta <= 1.0)) throw Error(ErrorCode::kInvalidParams, "beta must lie in (0, 1]");
    if (!(sigma_omega >= 0.0) || !std::isfinite(sigma_omega)) {
      throw Error(ErrorCode::kInvalidParams, "sigma_omega must be finite and >= 0");
    }
    if (d == 0) throw Error(ErrorCode::kInvalidDimension, "d must be >= 1");
    if (eta && (!(*eta > 0.0) || !std::isfinite(*eta))) {
      throw Error(ErrorCode::kInvalidParams, "eta must be positive and finite");
    }
  }

  double sigma_alpha() const { return std::pow(sigma, alpha); }
  // LR (convex) or sqrt(L Delta) (non-convex): the unit of the regime thresholds.
  double scale() const { return convex ? L * radius : std::sqrt(L * radius); }
  double eta_or_default() const { return eta.value_or(1e-3 * scale()); }
};

inline double zeta_lambda(const TheoryParams& p) {
  p.validate();
  return std::max(0.0, 2.0 * p.scale() - 0.5 * p.lambda);
}

struct StepSize {
  double gamma = 0.0;
  double ceiling = 0.0;          // 1/(8L) convex, 1/(4L) non-convex
  std::array<double, 6> parts{};  // gamma_1 .. gamma_6, +inf when unconstrained
  int binding = 0;               // 0 = ceiling, i = gamma_i
  bool reduced = false;
  std::vector<std::string> warnings;
};

namespace detail {

inline double checked_part(double v, int index) {
  if (!(v > 0.0)) {
    throw Error(ErrorCode::kInternal, "step size gamma_" + std::to_string(index) +
                                          " is not positive (" + std::to_string(v) + ")");
  }
  return v;
}

// Shared pieces of gamma_1 and gamma_2. Uses sigma^a (1 + z^a/sigma^a) =
// sigma^a + z^a so that sigma = 0 is well defined.
struct MomentTerms {
  double c;       // 2^(2a-1)
  double s_sum;   // sigma^a + zeta^a
  double bracket; // zeta/lambda + 1/2 + lambda^(a-1) zeta/(c s_sum) + (sigma^a/s_sum)^(1/a)
};

inline MomentTerms moment_terms(const TheoryParams& p, double zeta) {
  const double a = p.alpha;
  MomentTerms t{};
  t.c = std::pow(2.0, 2.0 * a - 1.0);
  t.s_sum = p.sigma_alpha() + std::pow(zeta, a);
  if (t.s_sum > 0.0) {
    t.bracket = zeta / p.lambda + 0.5 + std::pow(p.lambda, a - 1.0) * zeta / (t.c * t.s_sum) +
                std::pow(p.sigma_alpha() / t.s_sum, 1.0 / a);
  }
  return t;
}

inline double dp_radius_term(const TheoryParams& p) {
  const double k1 = static_cast<double>(p.K) + 1.0;
  return std::sqrt(static_cast<double>(p.d)) + std::sqrt(2.0 * std::log(k1 / p.beta));
}

inline double gamma6_bracket(const TheoryParams& p) {
  const double kd = (static_cast<double>(p.K) + 1.0) * static_cast<double>(p.d);
  const double lg = std::log(4.0 * (static_cast<double>(p.K) + 1.0) / p.beta);
  return 7.0 * (kd + 2.0 * std::sqrt(kd * lg) + 2.0 * lg);
}

// Parts for either setting. `r` is R (convex) or sqrt(Delta/L) (non-convex);
// `k` holds the six leading constants.
inline std::array<double, 6> step_parts(const TheoryParams& p, double r,
                                        const std::array<double, 6>& k, bool convex) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double a = p.alpha;
  const double k1 = static_cast<double>(p.K) + 1.0;
  const double zeta = std::max(0.0, 2.0 * p.scale() - 0.5 * p.lambda);
  const MomentTerms m = moment_terms(p, zeta);
  const double ln8 = std::log(8.0 * k1 / p.beta);
  const double phi = std::sqrt(3.0 * std::log(4.0 * k1 / p.beta));

  std::array<double, 6> g{};
  g[0] = m.s_sum > 0.0
             ? r / (k[0] * std::sqrt(m.c + 1.0) * std::pow(p.lambda, 1.0 - a / 2.0) *
                    std::sqrt(6.0 * k1 * ln8 * m.s_sum))
             : kInf;
  g[1] = m.s_sum > 0.0 ? r * std::pow(p.lambda, a - 1.0) / (k[1] * k1 * m.c * m.s_sum * m.bracket)
                       : kInf;
  const double sw = p.sigma_omega;
  g[2] = sw > 0.0 ? r / (k[2] * sw * std::sqrt(static_cast<double>(p.d) * k1) *
                         (std::sqrt(2.0) + std::sqrt(2.0) * phi))
                  : kInf;
  const double g4_den = p.lambda + sw * dp_radius_term(p);
  g[3] = convex ? k[3] * r / g4_den : r / (k[3] * g4_den);
  g[4] = r / (k[4] * p.lambda * ln8);
  g[5] = sw > 0.0 ? r / (k[5] * sw * std::sqrt(gamma6_bracket(p))) : kInf;
  for (int i = 0; i < 6; ++i) checked_part(g[i], i + 1);
  return g;
}

inline StepSize assemble(double ceiling, const std::array<double, 6>& parts, int n_used,
                         bool reduced) {
  StepSize s;
  s.ceiling = ceiling;
  s.parts = parts;
  s.reduced = reduced;
  s.gamma = ceiling;
  s.binding = 0;
  for (int i = 0; i < n_used; ++i) {
    if (parts[i] < s.gamma) {
      s.gamma = parts[i];
      s.binding = i + 1;
    }
  }
  return s;
}

inline std::vector<std::string> reduced_range_warnings(const TheoryParams& p) {
  std::vector<std::string> w;
  const double k = static_cast<double>(p.K);
  const double lg = std::log(k / p.beta);
  if (lg > 0.0) {
    const double limit = p.sigma * std::pow(k / lg, 1.0 / p.alpha);
    if (p.lambda > limit) {
      w.push_back("lambda exceeds sigma*(K/ln(K/beta))^(1/alpha) = " + std::to_string(limit) +
                  "; dropped step-size terms may bind");
    }
  }
  return w;
}

}  // namespace detail

inline StepSize stepsize_convex_full(const TheoryParams& p) {
  p.validate();
  if (!p.convex) throw Error(ErrorCode::kInvalidParams, "stepsize_convex_full needs convex params");
  const auto parts =
      detail::step_parts(p, p.radius, {42.0, 28.0, 56.0, 2.0 - std::sqrt(2.0), 56.0, 2.0}, true);
  return detail::assemble(1.0 / (8.0 * p.L), parts, 6, false);
}

inline StepSize stepsize_nonconvex_full(const TheoryParams& p) {
  p.validate();
  if (p.convex) throw Error(ErrorCode::kInvalidParams, "stepsize_nonconvex_full needs non-convex params");
  const double r = std::sqrt(p.radius) / std::sqrt(p.L);
  const auto parts = detail::step_parts(p, r, {21.0, 14.0, 14.0, 20.0, 28.0, 1.0}, false);
  return detail::assemble(1.0 / (4.0 * p.L), parts, 6, false);
}

// min{ceiling, gamma_1, gamma_2, gamma_3}; all six parts are still reported.
inline StepSize stepsize_convex_reduced(const TheoryParams& p) {
  StepSize full = stepsize_convex_full(p);
  StepSize s = detail::assemble(full.ceiling, full.parts, 3, true);
  s.warnings = detail::reduced_range_warnings(p);
  return s;
}

inline StepSize stepsize_nonconvex_reduced(const TheoryParams& p) {
  StepSize full = stepsize_nonconvex_full(p);
  StepSize s = detail::assemble(full.ceiling, full.parts, 3, true);
  s.warnings = detail::reduced_range_warnings(p);
  return s;
}

inline StepSize stepsize_full(const TheoryParams& p) {
  return p.convex ? stepsize_convex_full(p) : stepsize_nonconvex_full(p);
}

inline StepSize stepsize_reduced(const TheoryParams& p) {
  return p.convex ? stepsize_convex_reduced(p) : stepsize_nonconvex_reduced(p);
}

// Right-hand side of the high-probability bound after K steps:
//   convex:      4R^2/(g(K+1)) + 64 L R^4/(lambda^2 g^2 (K+1)^2)
//   non-convex:  8D/(g(K+1))   + 128 D^2/(lambda^2 g^2 (K+1)^2)
inline double theory_bound(const TheoryParams& p, double gamma) {
  p.validate();
  if (!(gamma > 0.0)) throw Error(ErrorCode::kInvalidParams, "gamma must be positive");
  const double gk = gamma * (static_cast<double>(p.K) + 1.0);
  const double l2 = p.lambda * p.lambda;
  const double r = p.radius;
  if (p.convex) {
    return 4.0 * r * r / gk + 64.0 * p.L * r * r * r * r / (l2 * gk * gk);
  }
  return 8.0 * r / gk + 128.0 * r * r / (l2 * gk * gk);
}

// ---------------------------------------------------------------------------
// Regime tables (no privacy noise).

struct RegimeReport {
  int regime_id = 0;  // 1..7, top to bottom
  int sub_row = 0;    // regime 3 only: 0 when sigma^a dominates, else 1
  double zeta = 0.0;
  double neighborhood = 0.0;
  std::string rate_label;
  std::optional<double> optimal_lambda;
  std::string notes;
};

inline constexpr const char* kRateExact = "(alpha-1)/alpha-rate to exact optimum";
inline constexpr const char* kRateNeighborhood = "1/sqrt(K)-rate to neighborhood";

// Rows are tested top to bottom; a tie goes to the first row whose closed
// condition holds.
inline RegimeReport classify_regime(const TheoryParams& p) {
  p.validate();
  if (p.sigma_omega > 0.0) {
    throw Error(ErrorCode::kTablesNotApplicable,
                "regime tables assume sigma_omega = 0; use optimal_lambda_dp for private runs");
  }
  const double a = p.alpha;
  const double lam = p.lambda;
  const double sig = p.sigma;
  const double sa = p.sigma_alpha();
  const double s = p.scale();
  // Prefactors: R and L R^2 (convex), sqrt(L Delta) and L Delta (non-convex).
  const double pa = p.convex ? p.radius : s;
  const double pb = p.convex ? p.L * p.radius * p.radius : s * s;
  const double eta = p.eta_or_default();
  const double zeta = std::max(0.0, 2.0 * s - 0.5 * lam);

  RegimeReport r;
  r.zeta = zeta;
  auto sigma_nbhd = [&] {
    return pa * sa / std::pow(lam, a - 1.0) + pb * sa * sa / std::pow(lam, 2.0 * a);
  };
  auto zeta_nbhd = [&] { return pa * zeta + pb * zeta * zeta / (lam * lam); };
  auto heavy_nbhd = [&] {
    return pa * std::pow(zeta, a + 1.0) / std::pow(lam, a) +
           pb * std::pow(zeta, 2.0 * a) / std::pow(lam, 2.0 * a + 2.0);
  };

  if (lam > 4.0 * s) {
    r.regime_id = 1;
    r.neighborhood = sigma_nbhd();
    const double k = static_cast<double>(p.K);
    const double lg = std::log(k / p.beta);
    if (lg > 0.0) r.optimal_lambda = sig * std::pow(k / lg, 1.0 / a);
  } else if (lam > 4.0 * s / 3.0) {
    if (lam <= sig) {
      r.regime_id = 2;
      r.neighborhood = sigma_nbhd();
      r.optimal_lambda = 4.0 * s;
    } else if (zeta <= sig) {
      r.regime_id = 3;
      if (sa >= std::pow(lam, a - 1.0) * zeta) {
        r.neighborhood = sigma_nbhd();
        r.optimal_lambda = 4.0 * s;
      } else {
        r.sub_row = 1;
        r.neighborhood = zeta_nbhd();
        r.optimal_lambda = 4.0 * s - eta;
      }
    } else {
      r.regime_id = 4;
      r.neighborhood = zeta_nbhd();
      r.optimal_lambda = 4.0 * s - 2.0 * sig;
    }
  } else {
    if (zeta <= sig) {
      r.regime_id = 5;
      r.neighborhood = pa * sa * zeta / std::pow(lam, a) +
                       pb * sa * sa * zeta * zeta / std::pow(lam, 2.0 * a + 2.0);
      r.optimal_lambda = 4.0 * s / 3.0;
    } else if (lam <= sig) {
      r.regime_id = 6;
      r.neighborhood = heavy_nbhd();
      r.optimal_lambda = 4.0 * s / 3.0 - eta;
    } else {
      r.regime_id = 7;
      r.neighborhood = heavy_nbhd();
      r.optimal_lambda = 4.0 * s / 3.0;
    }
  }
  r.rate_label = r.regime_id == 1 ? kRateExact : kRateNeighborhood;

  std::string notes;
  if (r.regime_id == 1) notes += "optimal lambda is order-level (unit constant)";
  if (r.optimal_lambda && !(*r.optimal_lambda > 0.0)) {
    if (!notes.empty()) notes += "; ";
    notes += "optimal lambda cell is nonpositive for these parameters";
    r.optimal_lambda.reset();
  }
  if (p.K < 1000) {
    if (!notes.empty()) notes += "; ";
    notes += "K < 1000: large-K statements may not apply";
  }
  r.notes = notes;
  return r;
}

// ---------------------------------------------------------------------------
// Optimal clipping level under a privacy target.

enum class LambdaBranch { kLarge, kSmall };

inline double optimal_lambda_dp(const TheoryParams& p, const PrivacyTarget& target,
                                LambdaBranch branch) {
  p.validate();
  target.validate();
  const double k = static_cast<double>(p.K);
  const double denom = static_cast<double>(p.d) * std::log(k / target.delta) *
                       std::log(1.0 / target.delta) * std::log(k / p.beta);
  const double s = p.scale();
  if (branch == LambdaBranch::kLarge) {
    return std::max(4.0 * s, std::pow(target.epsilon * p.sigma_alpha() / denom, 1.0 / p.alpha));
  }
  return std::min(4.0 * s / 3.0,
                  2.0 * target.epsilon * s / (std::pow(denom, 1.0 / (2.0 * p.alpha + 2.0)) + 1.0));
}

}  // namespace hclip
