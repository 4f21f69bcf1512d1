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
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nes/embedding.h"

namespace nes {

using NamedEmbedding = std::pair<std::string, Embedding>;

// Where embeddings for texts, entities and images come from. Two kinds:
//
//  * file-backed: an immutable key -> vector table, typically loaded from a
//    .nese or JSON-lines file of precomputed encoder outputs;
//  * hash-based: a seeded feature-hashing text embedder. Each lowercased
//    token is hashed to a signed bucket, bucket counts are summed in 64-bit
//    integers and only then projected to floats and L2-normalized, so the
//    output is bit-identical across runs and platforms.
//
// Immutable after construction; safe for concurrent readers.
class EmbeddingSource {
 public:
  enum class Kind { kFileBacked, kHashBased };

  static EmbeddingSource hash_based(std::size_t dim, std::uint64_t seed);

  // Entries are renormalized. `dim` is required when `entries` is empty.
  static EmbeddingSource file_backed(std::vector<NamedEmbedding> entries,
                                     std::optional<std::size_t> dim = std::nullopt);

  Kind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // File-backed table, sorted by key. Empty for hash-based sources.
  const std::map<std::string, Embedding, std::less<>>& entries() const noexcept {
    return table_;
  }
  bool contains(std::string_view key) const;

 private:
  EmbeddingSource(Kind kind, std::size_t dim, std::uint64_t seed)
      : kind_(kind), dim_(dim), seed_(seed) {}

  Kind kind_;
  std::size_t dim_;
  std::uint64_t seed_;
  std::map<std::string, Embedding, std::less<>> table_;
};

// Seeded 64-bit token hash used by the hash-based source.
std::uint64_t hash_token(std::uint64_t seed, std::string_view token);

// Normalized embedding of `text`. Throws kEmptyInput for blank text and
// kUnknownKey when a file-backed source has no entry for the trimmed text.
Embedding embed_text(const EmbeddingSource& source, std::string_view text);

// The templated description "A photo of {entity}" used for every entity.
std::string entity_prompt(std::string_view entity);

// embed_text(source, entity_prompt(entity)).
Embedding embed_entity(const EmbeddingSource& source, std::string_view entity);

enum class EmbeddingFileFormat { kBinary, kLineDelimited };

// Binary ".nese" layout (all little-endian):
//   "NESE" | u32 version=1 | u32 count | u32 dim |
//   count x { u16 key_len | key bytes | dim x f32 }
// Line-delimited: one {"key": "...", "vector": [...]} object per line.
//
// A line-delimited file with no records carries no dimension, so
// `expected_dim` must be given for it. When given, it is also checked
// against the file.
EmbeddingSource load_embedding_file(const std::filesystem::path& path,
                                    EmbeddingFileFormat format,
                                    std::optional<std::size_t> expected_dim = std::nullopt);

// Sniffs the magic bytes to pick the format.
EmbeddingSource load_embedding_file(const std::filesystem::path& path,
                                    std::optional<std::size_t> expected_dim = std::nullopt);

void write_embedding_file(const std::filesystem::path& path,
                          const std::vector<NamedEmbedding>& entries, std::size_t dim,
                          EmbeddingFileFormat format);

void write_embedding_file(const std::filesystem::path& path, const EmbeddingSource& source,
                          EmbeddingFileFormat format);

}  // namespace nes
