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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nes/embedding.h"
#include "nes/prefix_features.h"

namespace nes {

inline constexpr double kDefaultLambda = 0.3;

enum class SuppressionStrategy { kFixedThreshold, kTopK, kTopKMinusOne, kProportional };

std::string_view to_string(SuppressionStrategy s);
SuppressionStrategy parse_suppression_strategy(std::string_view name);

// tau_neg is present iff the strategy is fixed-threshold; proportion iff it
// is proportional. There is no default tau_neg.
struct SuppressionConfig {
  SuppressionStrategy strategy = SuppressionStrategy::kFixedThreshold;
  std::optional<double> tau_neg;
  double lambda = kDefaultLambda;
  std::optional<double> proportion;

  // Throws kInvalidConfig.
  void validate() const;
};

struct SuppressionReport {
  std::vector<double> scores;
  std::vector<std::size_t> selected;  // ascending
  double lambda_applied = 1.0;
};

nlohmann::json to_json(const SuppressionReport& report);

// Empty when the report is consistent with a prefix of `length` tokens.
std::string check_invariants(const SuppressionReport& report, std::size_t length);

// attention[n][t] = softmax_t(q_n . token_t / sqrt(d)) for negative entity n.
std::vector<std::vector<double>> negative_attention(const PrefixFeatures& prefix,
                                                    std::span<const Embedding> negatives);

// Per-token maximum of negative_attention over entities; all zeros when
// there are no negatives. Throws kDimMismatch.
std::vector<double> score_negative_attention(const PrefixFeatures& prefix,
                                             std::span<const Embedding> negatives);

// Token indices to suppress, ascending. Rankings break ties by lower index.
std::vector<std::size_t> select_tokens(std::span<const double> scores, std::size_t neg_count,
                                       const SuppressionConfig& config);

// Scales selected tokens by lambda; others are copied bit-for-bit.
// Throws kIndexOutOfRange or kInvalidConfig (lambda outside [0, 1]).
PrefixFeatures suppress(const PrefixFeatures& prefix, std::span<const std::size_t> selected,
                        double lambda);

}  // namespace nes
