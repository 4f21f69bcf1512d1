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

#include "nes/prefix_features.h"

#include <cmath>
#include <string>

#include "nes/error.h"

namespace nes {

PrefixFeatures::PrefixFeatures(std::size_t length, std::size_t width, std::vector<double> values)
    : length_(length), width_(width), values_(std::move(values)) {
  if (length_ == 0 || width_ == 0 || values_.size() != length_ * width_) {
    throw Error(ErrorCode::kDimMismatch,
                "prefix shape " + std::to_string(length_) + "x" + std::to_string(width_) +
                    " does not fit " + std::to_string(values_.size()) + " values");
  }
  for (double x : values_) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kFormatError, "non-finite prefix value");
  }
}

PrefixFeatures PrefixFeatures::from_embedding(const Embedding& e) {
  return PrefixFeatures(1, e.dim(), std::vector<double>(e.values().begin(), e.values().end()));
}

PrefixFeatures PrefixFeatures::zeros(std::size_t length, std::size_t width) {
  return PrefixFeatures(length, width, std::vector<double>(length * width, 0.0));
}

std::vector<double> PrefixFeatures::mean_token() const {
  std::vector<double> mean(width_, 0.0);
  for (std::size_t t = 0; t < length_; ++t) {
    const auto tok = token(t);
    for (std::size_t j = 0; j < width_; ++j) mean[j] += tok[j];
  }
  for (double& x : mean) x /= static_cast<double>(length_);
  return mean;
}

nlohmann::json to_json(const PrefixFeatures& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < p.length(); ++t) {
    const auto tok = p.token(t);
    rows.push_back(std::vector<double>(tok.begin(), tok.end()));
  }
  return rows;
}

}  // namespace nes
