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

#include "nes/embedder.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "binary_io.h"
#include "json.hpp"
#include "nes/error.h"
#include "nes/text.h"

namespace nes {
namespace {

constexpr std::string_view kMagic = "NESE";
constexpr std::uint32_t kVersion = 1;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Embedding hash_embed(std::size_t dim, std::uint64_t seed, std::string_view text) {
  std::vector<std::int64_t> buckets(dim, 0);
  for (const auto& tok : tokenize(text)) {
    const std::uint64_t h = hash_token(seed, tok.text);
    const std::size_t bucket = static_cast<std::size_t>(h % dim);
    buckets[bucket] += (h >> 63) ? -1 : 1;
  }
  std::vector<double> v(buckets.begin(), buckets.end());
  return Embedding::normalize_or_basis(v);
}

std::string describe(const std::filesystem::path& path) { return path.string(); }

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + describe(path));
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + describe(path));
  return out;
}

Embedding parse_vector(std::vector<float> values, const std::string& where) {
  for (float x : values) {
    if (!std::isfinite(x)) throw Error(ErrorCode::kFormatError, where + ": non-finite value");
  }
  if (values.empty()) throw Error(ErrorCode::kFormatError, where + ": empty vector");
  return Embedding(std::move(values));
}

std::vector<NamedEmbedding> read_binary(const std::filesystem::path& path,
                                        std::size_t& dim_out) {
  auto in = open_input(path);
  io::LittleEndianReader r(in, describe(path));
  if (r.bytes(kMagic.size()) != kMagic) {
    throw Error(ErrorCode::kFormatError, describe(path) + ": bad magic");
  }
  const auto version = r.uint<std::uint32_t>();
  if (version != kVersion) {
    throw Error(ErrorCode::kFormatError,
                describe(path) + ": unsupported version " + std::to_string(version));
  }
  const auto count = r.uint<std::uint32_t>();
  const auto dim = r.uint<std::uint32_t>();
  if (dim == 0) throw Error(ErrorCode::kFormatError, describe(path) + ": dim is zero");
  dim_out = dim;

  std::vector<NamedEmbedding> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto key_len = r.uint<std::uint16_t>();
    std::string key = r.bytes(key_len);
    std::vector<float> values(dim);
    for (auto& x : values) x = r.f32();
    entries.emplace_back(std::move(key),
                         parse_vector(std::move(values),
                                      describe(path) + " record " + std::to_string(i)));
  }
  if (!r.at_end()) throw Error(ErrorCode::kFormatError, describe(path) + ": trailing bytes");
  return entries;
}

std::vector<NamedEmbedding> read_lines(const std::filesystem::path& path,
                                       std::optional<std::size_t>& dim_out) {
  auto in = open_input(path);
  std::vector<NamedEmbedding> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = describe(path) + ":" + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormatError, where + ": " + e.what());
    }
    if (!obj.is_object() || !obj.contains("key") || !obj["key"].is_string() ||
        !obj.contains("vector") || !obj["vector"].is_array()) {
      throw Error(ErrorCode::kFormatError, where + ": expected {\"key\", \"vector\"}");
    }
    std::vector<float> values;
    for (const auto& x : obj["vector"]) {
      if (!x.is_number()) throw Error(ErrorCode::kFormatError, where + ": non-numeric value");
      values.push_back(static_cast<float>(x.get<double>()));
    }
    if (dim_out && values.size() != *dim_out) {
      throw Error(ErrorCode::kFormatError, where + ": dim mismatch");
    }
    dim_out = values.size();
    entries.emplace_back(obj["key"].get<std::string>(), parse_vector(std::move(values), where));
  }
  return entries;
}

}  // namespace

std::uint64_t hash_token(std::uint64_t seed, std::string_view token) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

EmbeddingSource EmbeddingSource::hash_based(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw Error(ErrorCode::kInvalidConfig, "hash embedder dim must be >= 1");
  return EmbeddingSource(Kind::kHashBased, dim, seed);
}

EmbeddingSource EmbeddingSource::file_backed(std::vector<NamedEmbedding> entries,
                                             std::optional<std::size_t> dim) {
  if (!dim) {
    if (entries.empty()) {
      throw Error(ErrorCode::kFormatError, "empty embedding table needs an explicit dim");
    }
    dim = entries.front().second.dim();
  }
  if (*dim == 0) throw Error(ErrorCode::kFormatError, "dim must be >= 1");
  EmbeddingSource source(Kind::kFileBacked, *dim, 0);
  for (auto& [key, emb] : entries) {
    if (emb.dim() != *dim) {
      throw Error(ErrorCode::kFormatError, "key '" + key + "' has dim " +
                                               std::to_string(emb.dim()) + ", expected " +
                                               std::to_string(*dim));
    }
    if (emb.norm() == 0.0) throw Error(ErrorCode::kFormatError, "key '" + key + "' is zero");
    auto [it, inserted] = source.table_.emplace(key, emb.normalized());
    if (!inserted) throw Error(ErrorCode::kFormatError, "duplicate key '" + key + "'");
  }
  return source;
}

bool EmbeddingSource::contains(std::string_view key) const {
  return table_.find(key) != table_.end();
}

Embedding embed_text(const EmbeddingSource& source, std::string_view text) {
  const std::string_view t = trim(text);
  if (t.empty()) throw Error(ErrorCode::kEmptyInput, "text is empty");
  if (source.kind() == EmbeddingSource::Kind::kHashBased) {
    return hash_embed(source.dim(), source.seed(), t);
  }
  const auto it = source.entries().find(t);
  if (it == source.entries().end()) {
    throw Error(ErrorCode::kUnknownKey, "no embedding for '" + std::string(t) + "'");
  }
  return it->second;
}

std::string entity_prompt(std::string_view entity) {
  return "A photo of " + std::string(trim(entity));
}

Embedding embed_entity(const EmbeddingSource& source, std::string_view entity) {
  if (trim(entity).empty()) throw Error(ErrorCode::kEmptyInput, "entity is empty");
  return embed_text(source, entity_prompt(entity));
}

EmbeddingSource load_embedding_file(const std::filesystem::path& path,
                                    EmbeddingFileFormat format,
                                    std::optional<std::size_t> expected_dim) {
  std::vector<NamedEmbedding> entries;
  std::optional<std::size_t> dim;
  if (format == EmbeddingFileFormat::kBinary) {
    std::size_t d = 0;
    entries = read_binary(path, d);
    dim = d;
  } else {
    dim = expected_dim;
    entries = read_lines(path, dim);
    if (!dim) {
      throw Error(ErrorCode::kFormatError,
                  describe(path) + ": no records and no expected dimension");
    }
  }
  if (expected_dim && *dim != *expected_dim) {
    throw Error(ErrorCode::kFormatError, describe(path) + ": dim " + std::to_string(*dim) +
                                             ", expected " + std::to_string(*expected_dim));
  }
  return EmbeddingSource::file_backed(std::move(entries), dim);
}

EmbeddingSource load_embedding_file(const std::filesystem::path& path,
                                    std::optional<std::size_t> expected_dim) {
  auto in = open_input(path);
  std::string head(kMagic.size(), '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  const bool binary = in.gcount() == static_cast<std::streamsize>(kMagic.size()) && head == kMagic;
  return load_embedding_file(
      path, binary ? EmbeddingFileFormat::kBinary : EmbeddingFileFormat::kLineDelimited,
      expected_dim);
}

void write_embedding_file(const std::filesystem::path& path,
                          const std::vector<NamedEmbedding>& entries, std::size_t dim,
                          EmbeddingFileFormat format) {
  if (dim == 0 || dim > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kFormatError, "dim out of range");
  }
  for (const auto& [key, emb] : entries) {
    if (emb.dim() != dim) throw Error(ErrorCode::kDimMismatch, "key '" + key + "'");
    if (key.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::kFormatError, "key longer than 65535 bytes");
    }
  }
  auto out = open_output(path);
  if (format == EmbeddingFileFormat::kBinary) {
    io::LittleEndianWriter w(out);
    w.bytes(kMagic);
    w.uint<std::uint32_t>(kVersion);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(entries.size()));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(dim));
    for (const auto& [key, emb] : entries) {
      w.uint<std::uint16_t>(static_cast<std::uint16_t>(key.size()));
      w.bytes(key);
      for (float x : emb.values()) w.f32(x);
    }
  } else {
    for (const auto& [key, emb] : entries) {
      nlohmann::json obj;
      obj["key"] = key;
      obj["vector"] = std::vector<float>(emb.values().begin(), emb.values().end());
      out << obj.dump() << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + describe(path));
}

void write_embedding_file(const std::filesystem::path& path, const EmbeddingSource& source,
                          EmbeddingFileFormat format) {
  if (source.kind() != EmbeddingSource::Kind::kFileBacked) {
    throw Error(ErrorCode::kInvalidConfig, "only file-backed sources can be written");
  }
  std::vector<NamedEmbedding> entries(source.entries().begin(), source.entries().end());
  write_embedding_file(path, entries, source.dim(), format);
}

}  // namespace nes
