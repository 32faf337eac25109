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

// Radial clipping clip(v, lambda) = min{1, lambda / |v|} v.
#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hclip/error.hpp"
#include "hclip/numkit.hpp"

namespace hclip {

// Positive clipping radius. Unclipped() is the +inf sentinel.
class ClipLevel {
 public:
  explicit ClipLevel(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw Error(ErrorCode::kInvalidParams,
                  "lambda must be positive and finite, got " + std::to_string(lambda));
    }
  }
  static ClipLevel Unclipped() { return ClipLevel(); }

  double value() const noexcept { return lambda_; }
  bool unclipped() const noexcept { return std::isinf(lambda_); }

 private:
  ClipLevel() : lambda_(std::numeric_limits<double>::infinity()) {}
  double lambda_;
};

// Clips v in place; returns the applied factor in (0, 1].
inline double clip_inplace(std::span<double> v, double lambda) {
  const double n = norm(std::span<const double>(v));
  if (n <= lambda) return 1.0;
  const double f = lambda / n;
  for (double& x : v) x *= f;
  return f;
}

inline Vector clip(const Vector& v, ClipLevel lambda) {
  std::vector<double> out = v.entries();
  clip_inplace(out, lambda.value());
  return Vector(std::move(out));
}

// c = min{1, lambda / (2 |grad|)}, with c = 1 at grad = 0.
inline double clip_factor_c(double grad_norm, ClipLevel lambda) {
  if (!(grad_norm >= 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "clip_factor_c: grad_norm must be >= 0");
  }
  if (grad_norm == 0.0) return 1.0;
  return std::min(1.0, lambda.value() / (2.0 * grad_norm));
}

// theta = g_hat - c * grad.
inline Vector theta(const Vector& g_hat, const Vector& grad, ClipLevel lambda) {
  require_same_dim(g_hat.size(), grad.size(), "theta");
  const double c = clip_factor_c(norm(grad), lambda);
  std::vector<double> out(g_hat.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = g_hat[i] - c * grad[i];
  return Vector(std::move(out));
}

}  // namespace hclip
