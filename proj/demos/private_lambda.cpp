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

// How the privacy budget moves the clipping level: calibrated noise, the two
// optimal-lambda branches, and the theoretical step at each epsilon.

#include <cstdio>

#include "hclip/hclip.hpp"

int main() {
  using namespace hclip;
  TheoryParams p;
  p.L = 1.0;
  p.radius = 1.0;
  p.sigma = 1.0;
  p.alpha = 1.5;
  p.K = 10000;
  p.beta = 0.1;
  p.d = 10;

  std::printf("%-8s %-12s %-12s %-12s %s\n", "epsilon", "lambda_big", "lambda_small", "sigma_omega",
              "gamma");
  for (double eps : {0.1, 1.0, 10.0, 1e3, 1e6}) {
    PrivacyTarget t;
    t.epsilon = eps;
    t.K = p.K;
    const double big = optimal_lambda_dp(p, t, LambdaBranch::kLarge);
    const double small = optimal_lambda_dp(p, t, LambdaBranch::kSmall);
    TheoryParams q = p;
    q.lambda = big;
    q.sigma_omega = calibrate_sigma_omega(t, ClipLevel(big));
    std::printf("%-8g %-12.6g %-12.6g %-12.6g %.6g\n", eps, big, small, q.sigma_omega,
                stepsize_full(q).gamma);
  }
  return 0;
}
