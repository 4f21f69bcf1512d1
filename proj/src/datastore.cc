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

#include "nes/datastore.h"

#include <algorithm>
#include <fstream>
#include <future>
#include <numeric>
#include <set>
#include <string>

#include "nes/error.h"
#include "nes/text.h"

namespace nes {
namespace {

constexpr std::size_t kDefaultShardSize = 8192;
constexpr const char* kCaptionsFile = "captions.tsv";
constexpr const char* kEmbeddingsFile = "embeddings.nese";

struct Scored {
  double score;
  std::size_t index;
};

// Records are sorted by id, so index order is id order.
bool ranks_before(const Scored& a, const Scored& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

void check_query(const Embedding& query, std::size_t dim) {
  if (query.dim() != dim) {
    throw Error(ErrorCode::kDimMismatch, "query dim " + std::to_string(query.dim()) +
                                             " vs store dim " + std::to_string(dim));
  }
}

void check_k(std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidConfig, "k must be >= 1");
}

}  // namespace

nlohmann::json to_json(const RetrievalResult& result) {
  nlohmann::json hits = nlohmann::json::array();
  for (const auto& h : result.hits) {
    hits.push_back({{"id", h.id}, {"caption", h.caption}, {"score", h.score}});
  }
  return hits;
}

Datastore Datastore::build(std::vector<CaptionRecord> records) {
  if (records.empty()) throw Error(ErrorCode::kEmpty, "datastore needs at least one record");
  const std::size_t dim = records.front().embedding.dim();
  for (const auto& r : records) {
    if (r.embedding.dim() != dim) {
      throw Error(ErrorCode::kDimMismatch, "record '" + r.id + "' has dim " +
                                               std::to_string(r.embedding.dim()) +
                                               ", expected " + std::to_string(dim));
    }
  }
  std::sort(records.begin(), records.end(),
            [](const CaptionRecord& a, const CaptionRecord& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].id == records[i - 1].id) {
      throw Error(ErrorCode::kDuplicateId, "duplicate id '" + records[i].id + "'");
    }
  }

  Datastore store;
  store.dim_ = dim;
  store.ids_.reserve(records.size());
  store.captions_.reserve(records.size());
  store.matrix_.reserve(records.size() * dim);
  for (auto& r : records) {
    const Embedding unit = r.embedding.normalized();
    store.matrix_.insert(store.matrix_.end(), unit.values().begin(), unit.values().end());
    store.ids_.push_back(std::move(r.id));
    store.captions_.push_back(std::move(r.caption));
  }
  return store;
}

RetrievalResult Datastore::retrieve(const Embedding& query, std::size_t k) const {
  check_query(query, dim_);
  check_k(k);
  const Embedding q = query.normalized();
  const std::size_t n = size();
  const std::size_t take = std::min(k, n);
  const std::size_t shard = shard_size_ ? shard_size_ : kDefaultShardSize;

  auto scan = [&](std::size_t begin, std::size_t end) {
    std::vector<Scored> scored;
    scored.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      scored.push_back({dot(q.values(), vector(i)), i});
    }
    const std::size_t keep = std::min(take, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                      scored.end(), ranks_before);
    scored.resize(keep);
    return scored;
  };

  std::vector<Scored> best;
  if (n <= shard) {
    best = scan(0, n);
  } else {
    std::vector<std::future<std::vector<Scored>>> parts;
    for (std::size_t begin = 0; begin < n; begin += shard) {
      parts.push_back(std::async(std::launch::async, scan, begin, std::min(n, begin + shard)));
    }
    for (auto& p : parts) {
      auto part = p.get();
      best.insert(best.end(), part.begin(), part.end());
    }
    std::partial_sort(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(take), best.end(),
                      ranks_before);
    best.resize(take);
  }

  RetrievalResult result;
  result.hits.reserve(best.size());
  for (const auto& s : best) result.hits.push_back({ids_[s.index], captions_[s.index], s.score});
  return result;
}

std::optional<std::size_t> Datastore::find(std::string_view id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

Embedding Datastore::embedding(std::size_t i) const {
  const auto v = vector(i);
  return Embedding(std::vector<float>(v.begin(), v.end()));
}

std::vector<CaptionRecord> Datastore::records() const {
  std::vector<CaptionRecord> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back({ids_[i], captions_[i], embedding(i)});
  return out;
}

void Datastore::set_shard_size(std::size_t records_per_shard) noexcept {
  shard_size_ = records_per_shard;
}

RetrievalResult brute_force_topk(std::span<const CaptionRecord> records, const Embedding& query,
                                 std::size_t k) {
  check_k(k);
  for (const auto& r : records) check_query(query, r.embedding.dim());
  if (records.empty()) return {};
  const Embedding q = query.normalized();

  std::vector<RetrievalHit> all;
  all.reserve(records.size());
  for (const auto& r : records) {
    all.push_back({r.id, r.caption, dot(q.values(), r.embedding.normalized().values())});
  }
  std::stable_sort(all.begin(), all.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  all.resize(std::min(k, all.size()));
  return {std::move(all)};
}

std::vector<std::pair<std::string, std::string>> load_caption_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tab == std::string::npos) throw Error(ErrorCode::kFormatError, where + ": missing TAB");
    if (tab == 0) throw Error(ErrorCode::kFormatError, where + ": empty id");
    rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return rows;
}

Datastore ingest_datastore(const std::filesystem::path& captions,
                           const std::filesystem::path& embeddings) {
  const auto rows = load_caption_file(captions);
  const EmbeddingSource source = load_embedding_file(embeddings);
  std::vector<CaptionRecord> records;
  records.reserve(rows.size());
  for (const auto& [id, caption] : rows) {
    const auto it = source.entries().find(id);
    if (it == source.entries().end()) {
      throw Error(ErrorCode::kUnknownKey, "no embedding for caption id '" + id + "'");
    }
    records.push_back({id, caption, it->second});
  }
  return Datastore::build(std::move(records));
}

void save_datastore(const Datastore& store, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());

  std::ofstream out(dir / kCaptionsFile, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + (dir / kCaptionsFile).string());
  std::vector<NamedEmbedding> entries;
  entries.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& id = store.id(i);
    const auto& caption = store.caption(i);
    if (id.find_first_of("\t\r\n") != std::string::npos ||
        caption.find_first_of("\r\n") != std::string::npos) {
      throw Error(ErrorCode::kFormatError, "record '" + id + "' cannot be stored as one TSV line");
    }
    out << id << '\t' << caption << '\n';
    entries.emplace_back(id, store.embedding(i));
  }
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + dir.string());
  write_embedding_file(dir / kEmbeddingsFile, entries, store.dim(), EmbeddingFileFormat::kBinary);
}

Datastore load_datastore(const std::filesystem::path& dir) {
  const auto rows = load_caption_file(dir / kCaptionsFile);
  const EmbeddingSource source = load_embedding_file(dir / kEmbeddingsFile);
  std::set<std::string, std::less<>> seen;
  std::vector<CaptionRecord> records;
  records.reserve(rows.size());
  for (const auto& [id, caption] : rows) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::kInvariantViolation, dir.string() + ": duplicate id '" + id + "'");
    }
    const auto it = source.entries().find(id);
    if (it == source.entries().end()) {
      throw Error(ErrorCode::kInvariantViolation,
                  dir.string() + ": caption '" + id + "' has no embedding");
    }
    records.push_back({id, caption, it->second});
  }
  if (source.entries().size() != records.size()) {
    throw Error(ErrorCode::kInvariantViolation,
                dir.string() + ": embeddings without a caption");
  }
  return Datastore::build(std::move(records));
}

}  // namespace nes
