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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nes/embedder.h"
#include "nes/embedding.h"

namespace nes {

inline constexpr std::size_t kDefaultRetrievalK = 9;

struct CaptionRecord {
  std::string id;
  std::string caption;
  Embedding embedding;
};

struct RetrievalHit {
  std::string id;
  std::string caption;
  double score = 0.0;

  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

// Hits ordered by descending score, ties by ascending id.
struct RetrievalResult {
  std::vector<RetrievalHit> hits;

  std::size_t size() const noexcept { return hits.size(); }
  bool empty() const noexcept { return hits.empty(); }
  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

nlohmann::json to_json(const RetrievalResult& result);

// Immutable caption corpus with exact top-k cosine search. Records are kept
// sorted by id with normalized embeddings in one contiguous buffer, so
// insertion order never affects results and cosine is a plain dot product.
class Datastore {
 public:
  // Throws kEmpty, kDuplicateId, kDimMismatch, kZeroVector.
  static Datastore build(std::vector<CaptionRecord> records);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }

  // Full scan with partial selection. Large stores are scanned in shards on
  // worker threads; the merge is exact so output matches the serial scan.
  RetrievalResult retrieve(const Embedding& query, std::size_t k = kDefaultRetrievalK) const;

  std::optional<std::size_t> find(std::string_view id) const;
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::string& caption(std::size_t i) const { return captions_[i]; }
  std::span<const float> vector(std::size_t i) const {
    return {matrix_.data() + i * dim_, dim_};
  }
  Embedding embedding(std::size_t i) const;

  std::vector<CaptionRecord> records() const;

  // Sets the shard size used by retrieve(); 0 restores the default.
  void set_shard_size(std::size_t records_per_shard) noexcept;

 private:
  Datastore() = default;

  std::size_t dim_ = 0;
  std::size_t shard_size_ = 0;
  std::vector<std::string> ids_;
  std::vector<std::string> captions_;
  std::vector<float> matrix_;
};

// Test oracle: exhaustive scan of `records` in the given order followed by a
// stable sort on (score desc, id asc). Throws kDimMismatch.
RetrievalResult brute_force_topk(std::span<const CaptionRecord> records, const Embedding& query,
                                 std::size_t k);

// "id<TAB>caption" per line. Throws kFormatError on missing tab or empty id.
std::vector<std::pair<std::string, std::string>> load_caption_file(
    const std::filesystem::path& path);

// Joins a caption file with an embedding file keyed by record id. Embedding
// keys without a caption are ignored; captions without an embedding throw
// kUnknownKey.
Datastore ingest_datastore(const std::filesystem::path& captions,
                           const std::filesystem::path& embeddings);

// Persists to `dir` as captions.tsv + embeddings.nese.
void save_datastore(const Datastore& store, const std::filesystem::path& dir);

// A persisted store must have unique ids and exactly one embedding per
// caption; anything else throws kInvariantViolation. Unparseable files are
// kFormatError as usual.
Datastore load_datastore(const std::filesystem::path& dir);

}  // namespace nes
