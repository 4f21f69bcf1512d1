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
#include <span>
#include <vector>

namespace nes {

inline constexpr double kNormTolerance = 1e-6;

// A dense, finite, non-empty real vector. Values are stored as f32 (the
// on-disk precision); all reductions over them accumulate in double.
class Embedding {
 public:
  // Throws kDimMismatch for an empty vector and kFormatError for NaN/Inf.
  explicit Embedding(std::vector<float> values);
  explicit Embedding(std::span<const double> values);

  // Unit vector along `axis`; the fallback for degenerate normalizations.
  static Embedding unit_basis(std::size_t dim, std::size_t axis = 0);

  // L2-normalizes `values`. An all-zero input yields unit_basis(dim).
  static Embedding normalize_or_basis(std::span<const double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }

  double norm() const noexcept;
  bool is_normalized(double tolerance = kNormTolerance) const noexcept;

  // Throws kZeroVector if the norm is zero.
  Embedding normalized() const;

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<float> values_;
};

// Sequential double-precision dot product. Every similarity score in the
// library goes through this so that equal inputs give bit-equal scores.
double dot(std::span<const float> a, std::span<const float> b);

// Checked variant; throws kDimMismatch.
double checked_dot(const Embedding& a, const Embedding& b);

}  // namespace nes
