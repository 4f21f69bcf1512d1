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

#include "nes/suppression.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nes/error.h"

namespace nes {
namespace {

std::vector<std::size_t> top_indices(std::span<const double> scores, std::size_t n) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  n = std::min(n, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

std::string_view to_string(SuppressionStrategy s) {
  switch (s) {
    case SuppressionStrategy::kFixedThreshold: return "fixed-threshold";
    case SuppressionStrategy::kTopK: return "top-k";
    case SuppressionStrategy::kTopKMinusOne: return "top-k-minus-1";
    case SuppressionStrategy::kProportional: return "proportional";
  }
  return "unknown";
}

SuppressionStrategy parse_suppression_strategy(std::string_view name) {
  if (name == "fixed-threshold") return SuppressionStrategy::kFixedThreshold;
  if (name == "top-k") return SuppressionStrategy::kTopK;
  if (name == "top-k-minus-1") return SuppressionStrategy::kTopKMinusOne;
  if (name == "proportional") return SuppressionStrategy::kProportional;
  throw Error(ErrorCode::kInvalidConfig, "unknown suppression strategy '" + std::string(name) + "'");
}

void SuppressionConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "lambda must lie in [0, 1]");
  }
  const bool wants_tau = strategy == SuppressionStrategy::kFixedThreshold;
  const bool wants_proportion = strategy == SuppressionStrategy::kProportional;
  if (wants_tau != tau_neg.has_value()) {
    throw Error(ErrorCode::kInvalidConfig,
                wants_tau ? "fixed-threshold requires tau_neg"
                          : "tau_neg is only valid with fixed-threshold");
  }
  if (tau_neg && !std::isfinite(*tau_neg)) {
    throw Error(ErrorCode::kInvalidConfig, "tau_neg must be finite");
  }
  if (wants_proportion != proportion.has_value()) {
    throw Error(ErrorCode::kInvalidConfig,
                wants_proportion ? "proportional requires proportion"
                                 : "proportion is only valid with proportional");
  }
  if (proportion && !(*proportion > 0.0 && *proportion <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "proportion must lie in (0, 1]");
  }
}

nlohmann::json to_json(const SuppressionReport& report) {
  return {{"scores", report.scores}, {"selected", report.selected}, {"lambda", report.lambda_applied}};
}

std::string check_invariants(const SuppressionReport& report, std::size_t length) {
  if (report.scores.size() != length) return "scores length differs from prefix length";
  for (std::size_t i : report.selected) {
    if (i >= length) return "selected index " + std::to_string(i) + " out of range";
  }
  if (!std::is_sorted(report.selected.begin(), report.selected.end()) ||
      std::adjacent_find(report.selected.begin(), report.selected.end()) != report.selected.end()) {
    return "selected indices are not strictly ascending";
  }
  if (!(report.lambda_applied >= 0.0 && report.lambda_applied <= 1.0)) return "lambda outside [0, 1]";
  return {};
}

std::vector<std::vector<double>> negative_attention(const PrefixFeatures& prefix,
                                                    std::span<const Embedding> negatives) {
  const std::size_t d = prefix.width();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<std::vector<double>> rows;
  rows.reserve(negatives.size());
  for (const auto& q : negatives) {
    if (q.dim() != d) {
      throw Error(ErrorCode::kDimMismatch, "negative entity dim " + std::to_string(q.dim()) +
                                               " vs prefix width " + std::to_string(d));
    }
    std::vector<double> row(prefix.length());
    for (std::size_t t = 0; t < prefix.length(); ++t) {
      const auto tok = prefix.token(t);
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += static_cast<double>(q[c]) * tok[c];
      row[t] = s * scale;
    }
    const double hi = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double& x : row) {
      x = std::exp(x - hi);
      total += x;
    }
    for (double& x : row) x /= total;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> score_negative_attention(const PrefixFeatures& prefix,
                                             std::span<const Embedding> negatives) {
  std::vector<double> scores(prefix.length(), 0.0);
  for (const auto& row : negative_attention(prefix, negatives)) {
    for (std::size_t t = 0; t < row.size(); ++t) scores[t] = std::max(scores[t], row[t]);
  }
  return scores;
}

std::vector<std::size_t> select_tokens(std::span<const double> scores, std::size_t neg_count,
                                       const SuppressionConfig& config) {
  config.validate();
  switch (config.strategy) {
    case SuppressionStrategy::kFixedThreshold: {
      std::vector<std::size_t> out;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > *config.tau_neg) out.push_back(i);
      }
      return out;
    }
    case SuppressionStrategy::kTopK:
      return top_indices(scores, neg_count);
    case SuppressionStrategy::kTopKMinusOne:
      return top_indices(scores, neg_count == 0 ? 0 : neg_count - 1);
    case SuppressionStrategy::kProportional: {
      if (scores.empty()) return {};
      // Absorb representation error so that e.g. 0.01 * 100 selects 1 token.
      const double raw = *config.proportion * static_cast<double>(scores.size());
      auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
      n = std::clamp<std::size_t>(n, 1, scores.size());
      return top_indices(scores, n);
    }
  }
  return {};
}

PrefixFeatures suppress(const PrefixFeatures& prefix, std::span<const std::size_t> selected,
                        double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "lambda must lie in [0, 1]");
  }
  PrefixFeatures out = prefix;
  std::vector<bool> hit(prefix.length(), false);
  for (std::size_t i : selected) {
    if (i >= prefix.length()) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "token " + std::to_string(i) + " of " + std::to_string(prefix.length()));
    }
    hit[i] = true;
  }
  for (std::size_t t = 0; t < prefix.length(); ++t) {
    if (!hit[t]) continue;
    for (double& x : out.token(t)) x *= lambda;
  }
  return out;
}

}  // namespace nes
