// Copyright 2026 The NES Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nes/pipeline.h"

namespace nes::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInvariant = 3;

// Command-line overrides for a loaded config; unset fields leave it alone.
struct Overrides {
  std::optional<std::string> mode;
  bool no_sir = false;
  bool no_sif = false;
  bool no_nef = false;
  bool no_as = false;
  std::optional<double> tau_sim;
  std::optional<double> tau_quality;
  std::optional<double> tau_neg;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<double> proportion;
  std::optional<std::string> fusion_strategy;
  std::optional<std::string> suppression_strategy;
  std::optional<std::size_t> top_m;
  std::optional<std::size_t> retrieval_k;
  std::optional<std::uint64_t> seed;
};

// Changing a strategy drops parameters the new strategy does not take.
// --alpha without --fusion-strategy selects the fixed strategy.
void apply_overrides(const Overrides& o, PipelineConfig& config);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nes::cli
