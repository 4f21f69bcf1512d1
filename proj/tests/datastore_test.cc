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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "nes/datastore.h"
#include "test_support.h"

namespace nes {
namespace {

using testing::code_of;
using testing::Gen;
using testing::TempDir;

// Cosine computed from scratch in double, no shared helpers.
std::vector<double> oracle_scores(const std::vector<CaptionRecord>& recs, const Embedding& q) {
  std::vector<double> out;
  for (const auto& r : recs) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < q.dim(); ++i) {
      ab += double(q[i]) * r.embedding[i];
      aa += double(q[i]) * q[i];
      bb += double(r.embedding[i]) * r.embedding[i];
    }
    out.push_back(ab / std::sqrt(aa * bb));
  }
  return out;
}

TEST(Retrieve, MatchesBruteForceIncludingTies) {
  Gen g(1);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = std::vector<std::size_t>{1, 2, 8, 32}[g.index(4)];
    const bool coarse = trial % 2 == 0;
    auto recs = testing::random_records(g, g.range(1, 200), d, coarse);
    std::shuffle(recs.begin(), recs.end(), g.rng());
    const auto store = Datastore::build(recs);
    for (int q = 0; q < 5; ++q) {
      const auto query = coarse ? g.coarse_embedding(d) : g.raw_embedding(d);
      const std::size_t k = g.range(1, 20);
      EXPECT_EQ(store.retrieve(query, k), brute_force_topk(recs, query, k));
    }
  }
}

TEST(Retrieve, RankScoresAgreeWithIndependentCosine) {
  Gen g(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = g.range(2, 64);
    const auto recs = testing::random_records(g, g.range(1, 100), d);
    const auto store = Datastore::build(recs);
    const auto query = g.raw_embedding(d);
    auto want = oracle_scores(recs, query);
    std::sort(want.rbegin(), want.rend());
    const auto got = store.retrieve(query, 9);
    ASSERT_EQ(got.size(), std::min<std::size_t>(9, recs.size()));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.hits[i].score, want[i], 1e-6);
  }
}

TEST(Retrieve, ShardedScanEqualsSerialScan) {
  Gen g(3);
  auto recs = testing::random_records(g, 3000, 8, true);
  auto store = Datastore::build(recs);
  for (int q = 0; q < 20; ++q) {
    const auto query = g.coarse_embedding(8);
    const auto serial = store.retrieve(query, 25);
    for (std::size_t shard : {64u, 700u, 2999u}) {
      store.set_shard_size(shard);
      EXPECT_EQ(store.retrieve(query, 25), serial) << shard;
    }
    store.set_shard_size(0);
  }
}

TEST(Retrieve, TieBreakByAscendingId) {
  const Embedding e(std::vector<float>{1, 0});
  const auto store = Datastore::build({{"b", "B", e}, {"c", "C", e}, {"a", "A", e}});
  const auto r = store.retrieve(e, 2);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.hits[0].id, "a");
  EXPECT_EQ(r.hits[1].id, "b");
}

TEST(Retrieve, SelfRetrievalAndKLargerThanStore) {
  Gen g(4);
  const auto recs = testing::random_records(g, 5, 16);
  const auto store = Datastore::build(recs);
  for (const auto& r : recs) {
    const auto res = store.retrieve(r.embedding, 9);
    EXPECT_EQ(res.size(), 5u);
    EXPECT_EQ(res.hits[0].id, r.id);
    EXPECT_NEAR(res.hits[0].score, 1.0, 1e-6);
  }
}

TEST(Retrieve, ScaleInvariantQuery) {
  Gen g(5);
  const auto recs = testing::random_records(g, 40, 8, true);
  const auto store = Datastore::build(recs);
  for (int i = 0; i < 20; ++i) {
    const auto q = g.coarse_embedding(8);
    std::vector<float> scaled(q.values().begin(), q.values().end());
    for (auto& x : scaled) x *= 4.0f;
    const auto a = store.retrieve(q, 6), b = store.retrieve(Embedding(scaled), 6);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a.hits[j].id, b.hits[j].id);
  }
}

TEST(Retrieve, Errors) {
  const auto store = Datastore::build({{"a", "x", Embedding(std::vector<float>{1, 0})}});
  EXPECT_EQ(code_of([&] { store.retrieve(Embedding(std::vector<float>{1, 0, 0})); }),
            ErrorCode::kDimMismatch);
  EXPECT_EQ(code_of([&] { store.retrieve(Embedding(std::vector<float>{0, 0})); }),
            ErrorCode::kZeroVector);
  EXPECT_EQ(code_of([&] { store.retrieve(Embedding(std::vector<float>{1, 0}), 0); }),
            ErrorCode::kInvalidConfig);
}

TEST(Build, Errors) {
  using V = std::vector<float>;
  EXPECT_EQ(code_of([] { Datastore::build({}); }), ErrorCode::kEmpty);
  EXPECT_EQ(code_of([] {
              Datastore::build({{"a", "", Embedding(V{1, 0})}, {"a", "", Embedding(V{0, 1})}});
            }),
            ErrorCode::kDuplicateId);
  EXPECT_EQ(code_of([] {
              Datastore::build({{"a", "", Embedding(V{1, 0})}, {"b", "", Embedding(V{1})}});
            }),
            ErrorCode::kDimMismatch);
  EXPECT_EQ(code_of([] { Datastore::build({{"a", "", Embedding(V{0, 0})}}); }),
            ErrorCode::kZeroVector);
}

TEST(Persistence, RoundTrip) {
  Gen g(6);
  TempDir dir;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = g.range(1, 20);
    auto recs = testing::random_records(g, g.range(1, 50), d);
    recs.front().caption = "";
    recs.back().caption += " \xc3\xa9t\xc3\xa9, with\ttab";
    const auto store = Datastore::build(recs);
    save_datastore(store, dir.path());
    const auto back = load_datastore(dir.path());
    ASSERT_EQ(back.size(), store.size());
    ASSERT_EQ(back.dim(), store.dim());
    for (std::size_t i = 0; i < store.size(); ++i) {
      EXPECT_EQ(back.id(i), store.id(i));
      EXPECT_EQ(back.caption(i), store.caption(i));
      for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(back.vector(i)[j], store.vector(i)[j], 1e-7);
    }
  }
}

TEST(Persistence, RejectsUnstorableRecords) {
  TempDir dir;
  const Embedding e(std::vector<float>{1});
  EXPECT_EQ(code_of([&] { save_datastore(Datastore::build({{"a\tb", "x", e}}), dir.path()); }),
            ErrorCode::kFormatError);
  EXPECT_EQ(code_of([&] { save_datastore(Datastore::build({{"a", "x\ny", e}}), dir.path()); }),
            ErrorCode::kFormatError);
}

TEST(Ingest, CaptionFileParsing) {
  TempDir dir;
  testing::write_text(dir / "c.tsv", "a\tfirst\r\n\nb\tsecond\twith tab\n");
  const auto rows = load_caption_file(dir / "c.tsv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].second, "first");
  EXPECT_EQ(rows[1].second, "second\twith tab");
  testing::write_text(dir / "bad.tsv", "no tab here\n");
  EXPECT_EQ(code_of([&] { load_caption_file(dir / "bad.tsv"); }), ErrorCode::kFormatError);
  testing::write_text(dir / "bad.tsv", "\tempty id\n");
  EXPECT_EQ(code_of([&] { load_caption_file(dir / "bad.tsv"); }), ErrorCode::kFormatError);
}

TEST(Ingest, MissingEmbeddingIsUnknownKey) {
  TempDir dir;
  testing::write_text(dir / "c.tsv", "a\tx\nb\ty\n");
  write_embedding_file(dir / "e.nese", {{"a", Embedding(std::vector<float>{1, 0})}}, 2,
                       EmbeddingFileFormat::kBinary);
  EXPECT_EQ(code_of([&] { ingest_datastore(dir / "c.tsv", dir / "e.nese"); }),
            ErrorCode::kUnknownKey);
}

TEST(RetrievalJson, Shape) {
  RetrievalResult r{{{"a", "cap", 0.5}}};
  EXPECT_EQ(to_json(r).dump(), R"([{"caption":"cap","id":"a","score":0.5}])");
}

}  // namespace
}  // namespace nes
