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

// Umbrella header for the library. The CLI layer (hclip/cli.hpp) is separate
// because it needs CLI11.
#pragma once

#include "hclip/clipping.hpp"
#include "hclip/config.hpp"
#include "hclip/error.hpp"
#include "hclip/harness.hpp"
#include "hclip/numkit.hpp"
#include "hclip/optimizer.hpp"
#include "hclip/oracles.hpp"
#include "hclip/parallel.hpp"
#include "hclip/privacy.hpp"
#include "hclip/schedule.hpp"
#include "hclip/verifier.hpp"
