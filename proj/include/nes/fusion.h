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

// Feature fusion: CLIPScore gating of synthetic-image embeddings, synthetic
// image / text mixing, cross-attention over retrieved captions and the
// mapping to decoder prefix tokens.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nes/embedding.h"
#include "nes/prefix_features.h"

namespace nes {

inline constexpr double kDefaultTauQuality = 0.6;

enum class FusionStrategy { kClipScoreForward, kClipScoreReverse, kFixed };

std::string_view to_string(FusionStrategy s);
FusionStrategy parse_fusion_strategy(std::string_view name);

struct FusionConfig {
  FusionStrategy strategy = FusionStrategy::kClipScoreForward;
  std::optional<double> alpha;  // set iff strategy == kFixed
  double tau_quality = kDefaultTauQuality;

  // Throws kInvalidConfig.
  void validate() const;
};

// Cosine similarity. Throws kDimMismatch or kZeroVector.
double clip_score(std::span<const float> a, std::span<const float> b);
double clip_score(const Embedding& a, const Embedding& b);

// Indices whose pair scores >= tau_quality, in input order.
std::vector<std::size_t> quality_gate(std::span<const std::pair<Embedding, Embedding>> pairs,
                                      double tau_quality = kDefaultTauQuality);

// The two shares of a synthetic-image / text mix. Both shares are stored,
// and complement() swaps them, so forward mixing with w and reverse mixing
// with the complement of w use bit-identical coefficients.
class MixingWeight {
 public:
  // Throws kInvalidConfig outside [0, 1].
  static MixingWeight of(double w);

  double weight() const noexcept { return weight_; }
  double remainder() const noexcept { return remainder_; }
  MixingWeight complement() const noexcept { return MixingWeight(remainder_, weight_); }

 private:
  MixingWeight(double weight, double remainder) : weight_(weight), remainder_(remainder) {}

  double weight_;
  double remainder_;
};

// normalize(w * synthetic + (1 - w) * text)
Embedding mix_forward(const Embedding& synthetic, const Embedding& text, MixingWeight w);
// normalize((1 - w) * synthetic + w * text)
Embedding mix_reverse(const Embedding& synthetic, const Embedding& text, MixingWeight w);

// The weight fuse_sif would use: the clamped CLIPScore, or alpha.
MixingWeight sif_weight(const Embedding& synthetic, const Embedding& text,
                        const FusionConfig& config);

// A zero mix falls back to the unit basis vector e1.
Embedding fuse_sif(const Embedding& synthetic, const Embedding& text, const FusionConfig& config);

// Projection parameters: q/k/v are d x d, map is (L*d) x (L*d), all
// row-major. Values are held in double but are always f32-representable so
// the weights file round-trips exactly.
class AttentionWeights {
 public:
  AttentionWeights(std::size_t dim, std::size_t prefix_length, std::vector<double> q,
                   std::vector<double> k, std::vector<double> v, std::vector<double> map);

  // Xavier-uniform in +-sqrt(6 / (fan_in + fan_out)) from a mt19937_64
  // stream; bit-identical for a given seed.
  static AttentionWeights xavier(std::size_t dim, std::size_t prefix_length, std::uint64_t seed);
  static AttentionWeights identity(std::size_t dim, std::size_t prefix_length);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t prefix_length() const noexcept { return prefix_length_; }
  std::span<const double> q() const noexcept { return q_; }
  std::span<const double> k() const noexcept { return k_; }
  std::span<const double> v() const noexcept { return v_; }
  std::span<const double> map() const noexcept { return map_; }

  friend bool operator==(const AttentionWeights&, const AttentionWeights&) = default;

 private:
  std::size_t dim_;
  std::size_t prefix_length_;
  std::vector<double> q_, k_, v_, map_;
};

// "NESW" | u32 version=1 | u32 d | u32 L | q | k | v | map, f32 LE.
AttentionWeights load_weights_file(const std::filesystem::path& path);
void write_weights_file(const std::filesystem::path& path, const AttentionWeights& weights);

struct CrossAttentionOutput {
  PrefixFeatures features;
  // attention[t][j]: weight of retrieved caption j for input token t.
  std::vector<std::vector<double>> attention;
};

// Single-head scaled dot-product cross-attention with a residual:
//   out_t = x_t + sum_j softmax_j((Wq x_t) . (Wk r_j) / sqrt(d)) Wv r_j
// Throws kEmptyRetrieval or kDimMismatch.
CrossAttentionOutput cross_attend(const PrefixFeatures& fused_input,
                                  std::span<const Embedding> retrieved,
                                  const AttentionWeights& weights);

PrefixFeatures fuse_retrieval(const PrefixFeatures& fused_input,
                              std::span<const Embedding> retrieved,
                              const AttentionWeights& weights);

// Linear map of the flattened tokens to L tokens of width d. A single-token
// input is tiled to L tokens first.
PrefixFeatures map_to_prefix(const PrefixFeatures& attn_out, const AttentionWeights& weights);

}  // namespace nes
