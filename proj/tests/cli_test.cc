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

#include <sstream>

#include "cli.h"
#include "test_support.h"

namespace nes {
namespace {

using testing::TempDir;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result nes_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nes");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Small on-disk workspace: captions, embeddings, vocabulary, config, inputs.
class Workspace {
 public:
  Workspace() {
    const auto text = EmbeddingSource::hash_based(16, 3);
    const std::vector<std::pair<std::string, std::string>> caps = {
        {"c1", "a dog catches a frisbee"}, {"c2", "a dog and a kite"},
        {"c3", "a cat on a couch"},        {"c4", "people flying a kite"}};
    std::string tsv;
    std::vector<NamedEmbedding> embs;
    for (const auto& [id, cap] : caps) {
      tsv += id + "\t" + cap + "\n";
      embs.emplace_back(id, embed_text(text, cap));
    }
    testing::write_text(dir / "captions.tsv", tsv);
    write_embedding_file(dir / "emb.jsonl", embs, 16, EmbeddingFileFormat::kLineDelimited);
    write_embedding_file(dir / "lookup.nese",
                         {{"img1", embed_text(text, "a dog with a frisbee")},
                          {"img2", embed_text(text, "a kite in the sky")}},
                         16, EmbeddingFileFormat::kBinary);
    testing::write_text(dir / "vocab.txt", "dog\nfrisbee\nkite\ncat\ncouch\nperson\n");
    testing::write_text(dir / "syn.tsv", "person\tpeople\n");
    testing::write_text(dir / "config.json", R"({
      "top_m": 2, "retrieval_k": 3, "prefix_length": 3, "seed": 9,
      "suppression": {"strategy": "top-k"},
      "resources": {"vocab": "vocab.txt", "synonyms": "syn.tsv", "embeddings": "lookup.nese",
                    "text_source": {"kind": "hash", "seed": 3}}})");
    testing::write_text(dir / "infer.jsonl",
                        "{\"id\":\"a\",\"image_key\":\"img1\",\"references\":[\"a dog with a frisbee\"]}\n"
                        "{\"id\":\"b\",\"image_key\":\"img2\",\"references\":[\"a kite\"]}\n");
    testing::write_text(dir / "train.jsonl",
                        "{\"id\":\"t1\",\"caption\":\"a dog with a frisbee\"}\n"
                        "{\"id\":\"t2\",\"caption\":\"a kite in the sky\"}\n");
  }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  Result ingest() {
    return nes_cli({"ingest", "--captions", p("captions.tsv"), "--embeddings", p("emb.jsonl"),
                    "--out", p("store")});
  }

  Result run(const std::string& mode, const std::string& input, const std::string& out,
             std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"run",      "--mode",  mode,     "--store", p("store"),
                                     "--config", p("config.json"), "--input", p(input),
                                     "--out",    p(out)};
    args.insert(args.end(), extra.begin(), extra.end());
    return nes_cli(args);
  }

  TempDir dir;
};

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(nes_cli({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(nes_cli({}).code, cli::kExitInput);
  EXPECT_EQ(nes_cli({"frobnicate"}).code, cli::kExitInput);
  EXPECT_EQ(nes_cli({"ingest", "--captions", "x"}).code, cli::kExitInput);
}

TEST(Cli, IngestAndRetrieve) {
  Workspace w;
  const auto ing = w.ingest();
  ASSERT_EQ(ing.code, 0) << ing.err;
  EXPECT_EQ(ing.out, "ingested 4 records (dim 16) into " + w.p("store") + "\n");

  const auto r = nes_cli({"retrieve", "--store", w.p("store"), "--query-key", "c2", "-k", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "c2\t1.000000\ta dog and a kite");
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);

  testing::write_text(w.dir / "q.json", "[0.5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1]");
  const auto j = nes_cli({"retrieve", "--store", w.p("store"), "--query-vec", w.p("q.json"), "--json"});
  ASSERT_EQ(j.code, 0) << j.err;
  const auto hits = nlohmann::json::parse(j.out);
  ASSERT_EQ(hits.size(), 4u);  // default k = 9, store has 4
  EXPECT_TRUE(hits[0].contains("score"));

  EXPECT_EQ(nes_cli({"retrieve", "--store", w.p("store")}).code, cli::kExitInput);
  EXPECT_EQ(nes_cli({"retrieve", "--store", w.p("store"), "--query-key", "zz"}).code,
            cli::kExitInput);
  testing::write_text(w.dir / "q.json", "[1, 2]");
  EXPECT_EQ(nes_cli({"retrieve", "--store", w.p("store"), "--query-vec", w.p("q.json")}).code,
            cli::kExitInput);
}

TEST(Cli, IngestInputErrors) {
  Workspace w;
  testing::write_text(w.dir / "captions.tsv", "c1 no tab\n");
  const auto r = w.ingest();
  EXPECT_EQ(r.code, cli::kExitInput);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_EQ(nes_cli({"ingest", "--captions", w.p("nope"), "--embeddings", w.p("emb.jsonl"), "--out",
                     w.p("s")})
                .code,
            cli::kExitInput);
}

TEST(Cli, TamperedStoreIsInvariantViolation) {
  Workspace w;
  ASSERT_EQ(w.ingest().code, 0);
  const auto tsv = testing::read_bytes(w.dir / "store" / "captions.tsv");
  testing::write_text(w.dir / "store" / "captions.tsv", tsv + "c1\ta second c1\n");
  EXPECT_EQ(nes_cli({"retrieve", "--store", w.p("store"), "--query-key", "c1"}).code,
            cli::kExitInvariant);
  EXPECT_EQ(w.run("inference", "infer.jsonl", "o.jsonl").code, cli::kExitInvariant);

  testing::write_text(w.dir / "store" / "captions.tsv", "c1\tonly one\n");
  EXPECT_EQ(nes_cli({"retrieve", "--store", w.p("store"), "--query-key", "c1"}).code,
            cli::kExitInvariant);
  testing::write_text(w.dir / "store" / "captions.tsv", tsv + "c9\tno vector\n");
  EXPECT_EQ(nes_cli({"retrieve", "--store", w.p("store"), "--query-key", "c1"}).code,
            cli::kExitInvariant);
  testing::write_text(w.dir / "store" / "embeddings.nese", "NESE");
  EXPECT_EQ(nes_cli({"retrieve", "--store", w.p("store"), "--query-key", "c1"}).code,
            cli::kExitInput);
}

TEST(Cli, RunInferenceAndReport) {
  Workspace w;
  ASSERT_EQ(w.ingest().code, 0);
  const auto r = w.run("inference", "infer.jsonl", "o.jsonl", {"--report", w.p("rep.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("wrote 2 of 2 instances"), std::string::npos);
  std::istringstream lines(testing::read_bytes(w.dir / "o.jsonl"));
  std::string line;
  std::vector<std::string> ids;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    ids.push_back(j.at("id"));
    for (const char* k : {"mode", "entity_sets", "suppression_report", "suppressed_prefix",
                          "positive_prompt", "generated", "references", "retrieved"}) {
      EXPECT_TRUE(j.contains(k)) << k;
    }
    EXPECT_EQ(j.at("mode"), "inference");
  }
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "b"}));
  const auto rep = testing::read_bytes(w.dir / "rep.jsonl");
  EXPECT_EQ(std::count(rep.begin(), rep.end(), '\n'), 2);
  EXPECT_NE(rep.find("\"id\":\"a\""), std::string::npos);
}

TEST(Cli, RunTrainingWithTogglesAndOverrides) {
  Workspace w;
  ASSERT_EQ(w.ingest().code, 0);
  // No synthetic keys: SIR and SIF must be off for training to proceed.
  EXPECT_EQ(w.run("training", "train.jsonl", "t.jsonl").code, cli::kExitInput);
  const auto r = w.run("training", "train.jsonl", "t.jsonl",
                       {"--no-sir", "--no-sif", "--suppression-strategy", "fixed-threshold",
                        "--tau-neg", "0.05", "--lambda", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto first = nlohmann::json::parse(
      testing::read_bytes(w.dir / "t.jsonl").substr(0, testing::read_bytes(w.dir / "t.jsonl").find('\n')));
  EXPECT_EQ(first.at("mode"), "training");
  EXPECT_EQ(first.at("references"), nlohmann::json::array({"a dog with a frisbee"}));
  // Bad values are input errors, not crashes.
  EXPECT_EQ(w.run("inference", "infer.jsonl", "o.jsonl", {"--lambda", "2"}).code, cli::kExitInput);
  EXPECT_EQ(w.run("inference", "infer.jsonl", "o.jsonl", {"--mode", "x"}).code, cli::kExitInput);
  EXPECT_EQ(w.run("inference", "missing.jsonl", "o.jsonl").code, cli::kExitInput);
  testing::write_text(w.dir / "config.json", R"({"colour": "red"})");
  EXPECT_EQ(w.run("inference", "infer.jsonl", "o.jsonl").code, cli::kExitInput);
}

TEST(Cli, RunIsByteIdentical) {
  Workspace w;
  ASSERT_EQ(w.ingest().code, 0);
  ASSERT_EQ(w.run("inference", "infer.jsonl", "o1.jsonl", {"--threads", "1"}).code, 0);
  ASSERT_EQ(w.run("inference", "infer.jsonl", "o2.jsonl", {"--threads", "3"}).code, 0);
  EXPECT_EQ(testing::read_bytes(w.dir / "o1.jsonl"), testing::read_bytes(w.dir / "o2.jsonl"));
  EXPECT_FALSE(testing::read_bytes(w.dir / "o1.jsonl").empty());
}

TEST(Cli, EvalChairAndRetrieval) {
  Workspace w;
  testing::write_text(w.dir / "pred.jsonl",
                      "{\"generated\":\"a dog and a kite\",\"references\":[\"a dog\"],"
                      "\"retrieved\":[\"a kite\"]}\n"
                      "{\"generated\":\"people on a couch\",\"references\":[\"a person on a couch\"]}\n");
  const auto c = nes_cli({"eval", "chair", "--pred", w.p("pred.jsonl"), "--vocab", w.p("vocab.txt"),
                          "--synonyms", w.p("syn.tsv"), "--json"});
  ASSERT_EQ(c.code, 0) << c.err;
  const auto j = nlohmann::json::parse(c.out);
  EXPECT_EQ(j.at("exact").at("chair_s"), "1/2");
  EXPECT_EQ(j.at("exact").at("chair_i"), "1/4");
  EXPECT_EQ(j.at("retrieval_sourced"), 1);
  const auto text = nes_cli({"eval", "chair", "--pred", w.p("pred.jsonl"), "--vocab", w.p("vocab.txt")});
  ASSERT_EQ(text.code, 0);
  EXPECT_EQ(text.out.rfind("instances\t2\n", 0), 0u);
  EXPECT_EQ(nes_cli({"eval", "chair", "--pred", w.p("pred.jsonl")}).code, cli::kExitInput);

  testing::write_text(w.dir / "ret.jsonl",
                      "{\"retrieved\":[\"dog\",\"kite\"],\"ground_truth\":[\"dog\"]}\n");
  const auto r = nes_cli({"eval", "retrieval", "--instances", w.p("ret.jsonl"), "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto d = nlohmann::json::parse(r.out);
  EXPECT_EQ(d.at("exact").at("acc"), "1/2");
  EXPECT_EQ(d.at("dhc"), 1);
  testing::write_text(w.dir / "ret.jsonl", "{\"retrieved_captions\":[\"a dog\"],\"ground_truth\":[]}\n");
  EXPECT_EQ(nes_cli({"eval", "retrieval", "--instances", w.p("ret.jsonl")}).code, cli::kExitInput);
}

TEST(Overrides, StrategyChangesDropForeignParameters) {
  PipelineConfig c;
  c.suppression.tau_neg = 0.4;
  cli::Overrides o;
  o.suppression_strategy = "proportional";
  cli::apply_overrides(o, c);
  EXPECT_FALSE(c.suppression.tau_neg.has_value());
  EXPECT_EQ(*c.suppression.proportion, kDefaultProportion);

  o = {};
  o.suppression_strategy = "top-k-minus-1";
  cli::apply_overrides(o, c);
  EXPECT_FALSE(c.suppression.proportion.has_value());
  EXPECT_NO_THROW(c.suppression.validate());

  o = {};
  o.alpha = 0.7;
  cli::apply_overrides(o, c);
  EXPECT_EQ(c.fusion.strategy, FusionStrategy::kFixed);
  EXPECT_EQ(*c.fusion.alpha, 0.7);
  o = {};
  o.fusion_strategy = "clipscore-reverse";
  cli::apply_overrides(o, c);
  EXPECT_FALSE(c.fusion.alpha.has_value());
  EXPECT_NO_THROW(c.fusion.validate());

  o = {};
  o.no_nef = true;
  o.top_m = 4;
  o.mode = "inference";
  cli::apply_overrides(o, c);
  EXPECT_FALSE(c.stages.nef);
  EXPECT_TRUE(c.stages.as);
  EXPECT_EQ(*c.top_m, 4u);
  EXPECT_EQ(c.mode, Mode::kInference);
}

}  // namespace
}  // namespace nes
