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

#include "json.hpp"
#include "nes/embedding.h"

namespace nes {

// L feature tokens of width d, row-major. This is the shape that flows from
// fusion through suppression to the decoder hand-off.
class PrefixFeatures {
 public:
  // Throws kDimMismatch unless length >= 1, width >= 1 and
  // values.size() == length * width; kFormatError on non-finite values.
  PrefixFeatures(std::size_t length, std::size_t width, std::vector<double> values);

  static PrefixFeatures from_embedding(const Embedding& e);
  static PrefixFeatures zeros(std::size_t length, std::size_t width);

  std::size_t length() const noexcept { return length_; }
  std::size_t width() const noexcept { return width_; }

  std::span<const double> token(std::size_t i) const {
    return {values_.data() + i * width_, width_};
  }
  std::span<double> token(std::size_t i) { return {values_.data() + i * width_, width_}; }
  std::span<const double> flat() const noexcept { return values_; }

  std::vector<double> mean_token() const;

  friend bool operator==(const PrefixFeatures&, const PrefixFeatures&) = default;

 private:
  std::size_t length_;
  std::size_t width_;
  std::vector<double> values_;
};

nlohmann::json to_json(const PrefixFeatures& p);

}  // namespace nes
