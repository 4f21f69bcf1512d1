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

// Caption-level hallucination metrics. All rates are exact fractions of
// integer counts; doubles only appear at the JSON boundary.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nes/entities.h"

namespace nes {

class Fraction {
 public:
  Fraction() = default;
  // Throws kInvalidConfig on a zero denominator.
  Fraction(std::int64_t num, std::int64_t den);

  // Parses "n/d" or an integer.
  static Fraction parse(std::string_view text);

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double value() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string str() const;

  friend bool operator==(const Fraction&, const Fraction&) = default;
  friend bool operator<(const Fraction& a, const Fraction& b) {
    return static_cast<__int128>(a.num_) * b.den_ < static_cast<__int128>(b.num_) * a.den_;
  }
  friend bool operator<=(const Fraction& a, const Fraction& b) { return !(b < a); }

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

// 0 when den == 0.
Fraction ratio_or_zero(std::int64_t num, std::int64_t den);

struct EvalInstance {
  EntitySet generated;
  EntitySet ground_truth;
  EntitySet retrieved;
};

struct ChairScores {
  Fraction chair_s;
  Fraction chair_i;
};

struct Attribution {
  std::int64_t total = 0;
  std::int64_t retrieval_sourced = 0;
  std::int64_t model_sourced = 0;
  Fraction ratio;
};

struct EvalReport {
  std::size_t instances = 0;
  Fraction chair_s;
  Fraction chair_i;
  std::optional<Fraction> recall;  // absent when there is no ground truth
  Attribution attribution;
};

struct RetrievalDiagnostics {
  Fraction acc;
  Fraction rc;
  Fraction ahc;
  std::int64_t dhc = 0;
};

// Throw kEmptyInput on an empty sequence.
ChairScores chair_scores(std::span<const EvalInstance> instances);
// Also throws kNoGroundTruth.
Fraction entity_recall(std::span<const EvalInstance> instances);
Attribution attribute_hallucinations(std::span<const EvalInstance> instances);
RetrievalDiagnostics retrieval_diagnostics(std::span<const EvalInstance> instances);

EvalReport evaluate(std::span<const EvalInstance> instances);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const RetrievalDiagnostics& diag);

// Builds one instance from a JSON object. Caption strings need `vocab`;
// entity arrays are canonicalized through it when given.
//   "generated": caption string or entity array
//   "references": caption array, or "ground_truth": entity array
//   "retrieved": caption array, or "retrieved_entities": entity array
// Throws kFormatError.
EvalInstance parse_chair_instance(const nlohmann::json& obj, const EntityVocabulary* vocab);

//   "retrieved": entity array, or "retrieved_captions": caption array
//   "ground_truth": entity array, or "references": caption array
EvalInstance parse_retrieval_instance(const nlohmann::json& obj, const EntityVocabulary* vocab);

std::vector<EvalInstance> load_chair_instances(const std::filesystem::path& path,
                                               const EntityVocabulary* vocab);
std::vector<EvalInstance> load_retrieval_instances(const std::filesystem::path& path,
                                                   const EntityVocabulary* vocab);

}  // namespace nes
