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

#include "nes/embedding.h"

#include <cmath>
#include <string>

#include "nes/error.h"

namespace nes {
namespace {

void validate(std::span<const float> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kDimMismatch, "embedding must have dim >= 1");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kFormatError,
                  "non-finite embedding value at index " + std::to_string(i));
    }
  }
}

}  // namespace

Embedding::Embedding(std::vector<float> values) : values_(std::move(values)) {
  validate(values_);
}

Embedding::Embedding(std::span<const double> values)
    : values_(values.begin(), values.end()) {
  validate(values_);
}

Embedding Embedding::unit_basis(std::size_t dim, std::size_t axis) {
  if (axis >= dim) {
    throw Error(ErrorCode::kIndexOutOfRange, "basis axis outside dimension");
  }
  std::vector<float> v(dim, 0.0f);
  v[axis] = 1.0f;
  return Embedding(std::move(v));
}

Embedding Embedding::normalize_or_basis(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::kDimMismatch, "embedding must have dim >= 1");
  }
  double sq = 0.0;
  for (double x : values) sq += x * x;
  if (!std::isfinite(sq)) {
    throw Error(ErrorCode::kFormatError, "non-finite value during normalization");
  }
  if (sq == 0.0) return unit_basis(values.size());
  const double n = std::sqrt(sq);
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<float>(values[i] / n);
  }
  return Embedding(std::move(out));
}

double Embedding::norm() const noexcept {
  double sq = 0.0;
  for (float x : values_) sq += static_cast<double>(x) * x;
  return std::sqrt(sq);
}

bool Embedding::is_normalized(double tolerance) const noexcept {
  return std::abs(norm() - 1.0) <= tolerance;
}

Embedding Embedding::normalized() const {
  std::vector<double> v(values_.begin(), values_.end());
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) throw Error(ErrorCode::kZeroVector, "cannot normalize a zero vector");
  return normalize_or_basis(v);
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

double checked_dot(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimMismatch,
                "dim " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  return dot(a.values(), b.values());
}

}  // namespace nes
