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
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hclip {

enum class ErrorCode {
  kInvalidDimension,
  kInvalidProblem,
  kMomentUnbounded,
  kInvalidTarget,
  kInvalidParams,
  kTablesNotApplicable,
  kDiverged,
  kPrecondition,
  kInvalidConfig,
  kIo,
  kExperimentFailed,
  kInternal,
};

constexpr std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidDimension: return "invalid-dimension";
    case ErrorCode::kInvalidProblem: return "invalid-problem";
    case ErrorCode::kMomentUnbounded: return "moment-unbounded";
    case ErrorCode::kInvalidTarget: return "invalid-target";
    case ErrorCode::kInvalidParams: return "invalid-params";
    case ErrorCode::kTablesNotApplicable: return "tables-not-applicable";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kExperimentFailed: return "experiment-failed";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the optimizer when an iterate leaves the finite / bounded region.
class DivergedError : public Error {
 public:
  DivergedError(std::size_t step, const std::string& message)
      : Error(ErrorCode::kDiverged,
              "step " + std::to_string(step) + ": " + message),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace hclip
