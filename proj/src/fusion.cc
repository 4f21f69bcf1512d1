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

#include "nes/fusion.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "binary_io.h"
#include "nes/error.h"

namespace nes {
namespace {

constexpr std::string_view kWeightsMagic = "NESW";
constexpr std::uint32_t kWeightsVersion = 1;

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kDimMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

Embedding mix(const Embedding& synthetic, const Embedding& text, double synthetic_share,
              double text_share) {
  require_same_dim(synthetic.dim(), text.dim(), "sif inputs");
  std::vector<double> out(synthetic.dim());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = synthetic_share * synthetic[i] + text_share * text[i];
  }
  return Embedding::normalize_or_basis(out);
}

// y = W x for a row-major n x n matrix.
void mat_vec(std::span<const double> w, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    double acc = 0.0;
    const double* row = w.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void softmax_in_place(std::vector<double>& logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& x : logits) {
    x = std::exp(x - hi);
    total += x;
  }
  for (double& x : logits) x /= total;
}

std::vector<double> uniform_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                                   double bound) {
  std::vector<double> m(rows * cols);
  for (double& x : m) {
    // 53 random mantissa bits; std::uniform_real_distribution is not
    // specified bit-for-bit across standard libraries.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = static_cast<float>((2.0 * u - 1.0) * bound);
  }
  return m;
}

std::vector<double> identity_matrix(std::size_t n) {
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = 1.0;
  return m;
}

}  // namespace

std::string_view to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::kClipScoreForward: return "clipscore-forward";
    case FusionStrategy::kClipScoreReverse: return "clipscore-reverse";
    case FusionStrategy::kFixed: return "fixed";
  }
  return "unknown";
}

FusionStrategy parse_fusion_strategy(std::string_view name) {
  if (name == "clipscore-forward") return FusionStrategy::kClipScoreForward;
  if (name == "clipscore-reverse") return FusionStrategy::kClipScoreReverse;
  if (name == "fixed") return FusionStrategy::kFixed;
  throw Error(ErrorCode::kInvalidConfig, "unknown fusion strategy '" + std::string(name) + "'");
}

void FusionConfig::validate() const {
  if (strategy == FusionStrategy::kFixed) {
    if (!alpha) throw Error(ErrorCode::kInvalidConfig, "fixed fusion requires alpha");
    if (!(*alpha >= 0.0 && *alpha <= 1.0)) {
      throw Error(ErrorCode::kInvalidConfig, "alpha must lie in [0, 1]");
    }
  } else if (alpha) {
    throw Error(ErrorCode::kInvalidConfig, "alpha is only valid with the fixed strategy");
  }
  if (!(tau_quality >= 0.0 && tau_quality <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "tau_quality must lie in [0, 1]");
  }
}

double clip_score(std::span<const float> a, std::span<const float> b) {
  require_same_dim(a.size(), b.size(), "clip_score");
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroVector, "clip_score of a zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double clip_score(const Embedding& a, const Embedding& b) {
  return clip_score(a.values(), b.values());
}

std::vector<std::size_t> quality_gate(std::span<const std::pair<Embedding, Embedding>> pairs,
                                      double tau_quality) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (clip_score(pairs[i].first, pairs[i].second) >= tau_quality) kept.push_back(i);
  }
  return kept;
}

MixingWeight MixingWeight::of(double w) {
  if (!(w >= 0.0 && w <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "mixing weight outside [0, 1]");
  }
  return MixingWeight(w, 1.0 - w);
}

Embedding mix_forward(const Embedding& synthetic, const Embedding& text, MixingWeight w) {
  return mix(synthetic, text, w.weight(), w.remainder());
}

Embedding mix_reverse(const Embedding& synthetic, const Embedding& text, MixingWeight w) {
  return mix(synthetic, text, w.remainder(), w.weight());
}

MixingWeight sif_weight(const Embedding& synthetic, const Embedding& text,
                        const FusionConfig& config) {
  config.validate();
  if (config.strategy == FusionStrategy::kFixed) return MixingWeight::of(*config.alpha);
  return MixingWeight::of(std::clamp(clip_score(synthetic, text), 0.0, 1.0));
}

Embedding fuse_sif(const Embedding& synthetic, const Embedding& text, const FusionConfig& config) {
  require_same_dim(synthetic.dim(), text.dim(), "sif inputs");
  const MixingWeight w = sif_weight(synthetic, text, config);
  if (config.strategy == FusionStrategy::kClipScoreReverse) return mix_reverse(synthetic, text, w);
  return mix_forward(synthetic, text, w);
}

AttentionWeights::AttentionWeights(std::size_t dim, std::size_t prefix_length,
                                   std::vector<double> q, std::vector<double> k,
                                   std::vector<double> v, std::vector<double> map)
    : dim_(dim),
      prefix_length_(prefix_length),
      q_(std::move(q)),
      k_(std::move(k)),
      v_(std::move(v)),
      map_(std::move(map)) {
  if (dim_ == 0 || prefix_length_ == 0) {
    throw Error(ErrorCode::kDimMismatch, "attention weights need d >= 1 and L >= 1");
  }
  const std::size_t sq = dim_ * dim_;
  const std::size_t wide = dim_ * prefix_length_;
  if (q_.size() != sq || k_.size() != sq || v_.size() != sq || map_.size() != wide * wide) {
    throw Error(ErrorCode::kDimMismatch, "attention weight shapes do not match d and L");
  }
  for (const auto* m : {&q_, &k_, &v_, &map_}) {
    for (double x : *m) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kFormatError, "non-finite attention weight");
    }
  }
}

AttentionWeights AttentionWeights::xavier(std::size_t dim, std::size_t prefix_length,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double proj_bound = std::sqrt(6.0 / static_cast<double>(dim + dim));
  const std::size_t wide = dim * prefix_length;
  const double map_bound = std::sqrt(6.0 / static_cast<double>(wide + wide));
  auto q = uniform_matrix(rng, dim, dim, proj_bound);
  auto k = uniform_matrix(rng, dim, dim, proj_bound);
  auto v = uniform_matrix(rng, dim, dim, proj_bound);
  auto m = uniform_matrix(rng, wide, wide, map_bound);
  return AttentionWeights(dim, prefix_length, std::move(q), std::move(k), std::move(v),
                          std::move(m));
}

AttentionWeights AttentionWeights::identity(std::size_t dim, std::size_t prefix_length) {
  return AttentionWeights(dim, prefix_length, identity_matrix(dim), identity_matrix(dim),
                          identity_matrix(dim), identity_matrix(dim * prefix_length));
}

AttentionWeights load_weights_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  io::LittleEndianReader r(in, path.string());
  if (r.bytes(kWeightsMagic.size()) != kWeightsMagic) {
    throw Error(ErrorCode::kFormatError, path.string() + ": bad magic");
  }
  if (r.uint<std::uint32_t>() != kWeightsVersion) {
    throw Error(ErrorCode::kFormatError, path.string() + ": unsupported version");
  }
  const std::size_t d = r.uint<std::uint32_t>();
  const std::size_t l = r.uint<std::uint32_t>();
  if (d == 0 || l == 0) throw Error(ErrorCode::kFormatError, path.string() + ": zero d or L");
  auto read = [&r](std::size_t n) {
    std::vector<double> m(n);
    for (double& x : m) x = r.f32();
    return m;
  };
  auto q = read(d * d);
  auto k = read(d * d);
  auto v = read(d * d);
  auto m = read(d * l * d * l);
  if (!r.at_end()) throw Error(ErrorCode::kFormatError, path.string() + ": trailing bytes");
  return AttentionWeights(d, l, std::move(q), std::move(k), std::move(v), std::move(m));
}

void write_weights_file(const std::filesystem::path& path, const AttentionWeights& weights) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  io::LittleEndianWriter w(out);
  w.bytes(kWeightsMagic);
  w.uint<std::uint32_t>(kWeightsVersion);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(weights.dim()));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(weights.prefix_length()));
  for (auto m : {weights.q(), weights.k(), weights.v(), weights.map()}) {
    for (double x : m) w.f32(static_cast<float>(x));
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

CrossAttentionOutput cross_attend(const PrefixFeatures& fused_input,
                                  std::span<const Embedding> retrieved,
                                  const AttentionWeights& weights) {
  if (retrieved.empty()) throw Error(ErrorCode::kEmptyRetrieval, "no retrieved captions to fuse");
  const std::size_t d = weights.dim();
  require_same_dim(fused_input.width(), d, "fused input width vs weights");
  for (const auto& r : retrieved) require_same_dim(r.dim(), d, "retrieved caption vs weights");

  std::vector<std::vector<double>> keys(retrieved.size(), std::vector<double>(d));
  std::vector<std::vector<double>> vals(retrieved.size(), std::vector<double>(d));
  for (std::size_t j = 0; j < retrieved.size(); ++j) {
    const std::vector<double> r(retrieved[j].values().begin(), retrieved[j].values().end());
    mat_vec(weights.k(), r, keys[j]);
    mat_vec(weights.v(), r, vals[j]);
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> out(fused_input.flat().begin(), fused_input.flat().end());
  std::vector<std::vector<double>> attention;
  attention.reserve(fused_input.length());
  std::vector<double> query(d);
  for (std::size_t t = 0; t < fused_input.length(); ++t) {
    mat_vec(weights.q(), fused_input.token(t), query);
    std::vector<double> row(retrieved.size());
    for (std::size_t j = 0; j < retrieved.size(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += query[c] * keys[j][c];
      row[j] = s * scale;
    }
    softmax_in_place(row);
    double* dst = out.data() + t * d;
    for (std::size_t j = 0; j < retrieved.size(); ++j) {
      for (std::size_t c = 0; c < d; ++c) dst[c] += row[j] * vals[j][c];
    }
    attention.push_back(std::move(row));
  }
  return {PrefixFeatures(fused_input.length(), d, std::move(out)), std::move(attention)};
}

PrefixFeatures fuse_retrieval(const PrefixFeatures& fused_input,
                              std::span<const Embedding> retrieved,
                              const AttentionWeights& weights) {
  return cross_attend(fused_input, retrieved, weights).features;
}

PrefixFeatures map_to_prefix(const PrefixFeatures& attn_out, const AttentionWeights& weights) {
  const std::size_t d = weights.dim();
  const std::size_t l = weights.prefix_length();
  require_same_dim(attn_out.width(), d, "mapping input width vs weights");
  if (attn_out.length() != 1 && attn_out.length() != l) {
    throw Error(ErrorCode::kDimMismatch, "mapping input has " + std::to_string(attn_out.length()) +
                                             " tokens; expected 1 or " + std::to_string(l));
  }
  std::vector<double> flat;
  flat.reserve(l * d);
  for (std::size_t t = 0; t < l; ++t) {
    const auto tok = attn_out.token(attn_out.length() == 1 ? 0 : t);
    flat.insert(flat.end(), tok.begin(), tok.end());
  }
  std::vector<double> out(l * d);
  mat_vec(weights.map(), flat, out);
  return PrefixFeatures(l, d, std::move(out));
}

}  // namespace nes
