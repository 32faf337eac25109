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

// Gaussian-mechanism noise scale for an (epsilon, delta) target under
// advanced composition over K clipped releases.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hclip/clipping.hpp"
#include "hclip/error.hpp"

namespace hclip {

enum class DpRegime { kExpectation, kFiniteSum };

inline std::string DpRegimeName(DpRegime r) {
  return r == DpRegime::kExpectation ? "expectation" : "finite-sum";
}

inline DpRegime ParseDpRegime(const std::string& s) {
  if (s == "expectation") return DpRegime::kExpectation;
  if (s == "finite-sum") return DpRegime::kFiniteSum;
  throw Error(ErrorCode::kInvalidTarget, "unknown privacy regime '" + s + "'");
}

struct PrivacyTarget {
  double epsilon = 1.0;
  double delta = 1e-5;
  std::uint64_t K = 1;
  DpRegime regime = DpRegime::kExpectation;
  double q = 1.0;     // sampling ratio b/n, finite-sum only
  double c_dp = 1.0;  // constant hidden in the Theta(.) calibration

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw Error(ErrorCode::kInvalidTarget, "epsilon must be positive and finite");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw Error(ErrorCode::kInvalidTarget, "delta must lie in (0, 1)");
    }
    if (K == 0) throw Error(ErrorCode::kInvalidTarget, "K must be >= 1");
    if (!(c_dp > 0.0) || !std::isfinite(c_dp)) {
      throw Error(ErrorCode::kInvalidTarget, "c_dp must be positive and finite");
    }
    if (regime == DpRegime::kFiniteSum && !(q > 0.0 && q <= 1.0)) {
      throw Error(ErrorCode::kInvalidTarget, "q must lie in (0, 1]");
    }
  }

  // Applicability conditions that are not hard errors.
  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (regime == DpRegime::kFiniteSum) {
      const double limit = c_dp * q * q * static_cast<double>(K);
      if (epsilon > limit) {
        w.push_back("finite-sum calibration assumes epsilon <= c_dp*q^2*K = " +
                    std::to_string(limit));
      }
    }
    return w;
  }
};

namespace detail {

// sigma_omega / lambda for a validated target.
inline double dp_noise_multiplier(const PrivacyTarget& t) {
  const double k = static_cast<double>(t.K);
  const double ln_inv_delta = std::log(1.0 / t.delta);
  if (t.regime == DpRegime::kExpectation) {
    return t.c_dp / t.epsilon * std::sqrt(k * std::log(k / t.delta) * ln_inv_delta);
  }
  return t.c_dp * t.q / t.epsilon * std::sqrt(k * ln_inv_delta);
}

}  // namespace detail

inline double calibrate_sigma_omega(const PrivacyTarget& target, ClipLevel lambda) {
  target.validate();
  if (lambda.unclipped()) {
    throw Error(ErrorCode::kInvalidParams, "privacy requires a finite clipping level");
  }
  return detail::dp_noise_multiplier(target) * lambda.value();
}

inline double invert_lambda_budget(const PrivacyTarget& target, double sigma_omega) {
  target.validate();
  if (!(sigma_omega > 0.0) || !std::isfinite(sigma_omega)) {
    throw Error(ErrorCode::kInvalidParams, "sigma_omega must be positive and finite");
  }
  return sigma_omega / detail::dp_noise_multiplier(target);
}

}  // namespace hclip
