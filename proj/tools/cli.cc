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

#include "cli.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nes/datastore.h"
#include "nes/error.h"
#include "nes/metrics.h"

namespace nes::cli {
namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

Embedding read_query_vector(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::kFormatError, path.string() + ": expected a number array");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw Error(ErrorCode::kFormatError, path.string() + ": non-numeric entry");
    v.push_back(x.get<double>());
  }
  return Embedding(std::span<const double>(v));
}

std::string fmt_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", s);
  return buf;
}

std::optional<EntityVocabulary> maybe_vocab(const std::string& vocab, const std::string& synonyms) {
  if (vocab.empty()) {
    if (!synonyms.empty()) throw Error(ErrorCode::kInvalidConfig, "--synonyms needs --vocab");
    return std::nullopt;
  }
  return EntityVocabulary::load(vocab, synonyms);
}

}  // namespace

void apply_overrides(const Overrides& o, PipelineConfig& c) {
  if (o.mode) c.mode = parse_mode(*o.mode);
  if (o.no_sir) c.stages.sir = false;
  if (o.no_sif) c.stages.sif = false;
  if (o.no_nef) c.stages.nef = false;
  if (o.no_as) c.stages.as = false;
  if (o.tau_sim) c.tau_sim = *o.tau_sim;
  if (o.top_m) c.top_m = *o.top_m;
  if (o.retrieval_k) c.retrieval_k = *o.retrieval_k;
  if (o.seed) c.seed = *o.seed;

  if (o.fusion_strategy) {
    c.fusion.strategy = parse_fusion_strategy(*o.fusion_strategy);
    if (c.fusion.strategy != FusionStrategy::kFixed) c.fusion.alpha.reset();
  } else if (o.alpha) {
    c.fusion.strategy = FusionStrategy::kFixed;
  }
  if (o.alpha) c.fusion.alpha = *o.alpha;
  if (o.tau_quality) c.fusion.tau_quality = *o.tau_quality;

  auto& s = c.suppression;
  if (o.suppression_strategy) {
    s.strategy = parse_suppression_strategy(*o.suppression_strategy);
    if (s.strategy != SuppressionStrategy::kFixedThreshold) s.tau_neg.reset();
    if (s.strategy != SuppressionStrategy::kProportional) s.proportion.reset();
  }
  if (o.tau_neg) s.tau_neg = *o.tau_neg;
  if (o.proportion) s.proportion = *o.proportion;
  if (s.strategy == SuppressionStrategy::kProportional && !s.proportion) {
    s.proportion = kDefaultProportion;
  }
  if (o.lambda) s.lambda = *o.lambda;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Negative entity suppression toolkit"};
  app.require_subcommand(1);

  // ingest
  std::string captions, embeddings, store_out;
  auto* ingest = app.add_subcommand("ingest", "Build and persist a datastore");
  ingest->add_option("--captions", captions, "id<TAB>caption file")->required();
  ingest->add_option("--embeddings", embeddings, "Embedding file keyed by caption id")->required();
  ingest->add_option("--out", store_out, "Output directory")->required();

  // retrieve
  std::string store_dir, query_key, query_vec;
  std::size_t k = kDefaultRetrievalK;
  bool retrieve_json = false;
  auto* retrieve = app.add_subcommand("retrieve", "Top-k caption retrieval");
  retrieve->add_option("--store", store_dir, "Datastore directory")->required();
  auto* qk = retrieve->add_option("--query-key", query_key, "Use a stored record's embedding");
  auto* qv = retrieve->add_option("--query-vec", query_vec, "JSON array holding the query vector");
  qk->excludes(qv);
  retrieve->add_option("-k", k, "Number of captions")->capture_default_str();
  retrieve->add_flag("--json", retrieve_json, "Print JSON");

  // run
  std::string config_path, input_path, out_path, report_path;
  std::size_t threads = 0;
  Overrides ov;
  auto* runcmd = app.add_subcommand("run", "Batch pipeline over JSON lines");
  runcmd->add_option("--mode", ov.mode, "training or inference");
  runcmd->add_option("--store", store_dir, "Datastore directory")->required();
  runcmd->add_option("--config", config_path, "Pipeline config (JSON)")->required();
  runcmd->add_option("--input", input_path, "Input JSON lines")->required();
  runcmd->add_option("--out", out_path, "Output JSON lines")->required();
  runcmd->add_option("--report", report_path, "Write suppression reports as JSON lines");
  runcmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
  runcmd->add_flag("--no-sir", ov.no_sir, "Query with the caption text instead");
  runcmd->add_flag("--no-sif", ov.no_sif, "Use text features only");
  runcmd->add_flag("--no-nef", ov.no_nef, "Let all retrieved entities through");
  runcmd->add_flag("--no-as", ov.no_as, "Skip attention-level suppression");
  runcmd->add_option("--tau-sim", ov.tau_sim);
  runcmd->add_option("--tau-quality", ov.tau_quality);
  runcmd->add_option("--tau-neg", ov.tau_neg);
  runcmd->add_option("--lambda", ov.lambda);
  runcmd->add_option("--alpha", ov.alpha);
  runcmd->add_option("--proportion", ov.proportion);
  runcmd->add_option("--fusion-strategy", ov.fusion_strategy,
                     "clipscore-forward | clipscore-reverse | fixed");
  runcmd->add_option("--suppression-strategy", ov.suppression_strategy,
                     "fixed-threshold | top-k | top-k-minus-1 | proportional");
  runcmd->add_option("--top-m", ov.top_m);
  runcmd->add_option("-k,--retrieval-k", ov.retrieval_k);
  runcmd->add_option("--seed", ov.seed, "Seed for generated attention weights");

  // eval
  std::string pred_path, instances_path, vocab_path, synonyms_path;
  bool eval_json = false;
  auto* eval = app.add_subcommand("eval", "Caption and retrieval metrics");
  eval->require_subcommand(1);
  auto* chair = eval->add_subcommand("chair", "CHAIR, recall and attribution");
  chair->add_option("--pred", pred_path, "Prediction JSON lines")->required();
  chair->add_option("--vocab", vocab_path, "Entity vocabulary")->required();
  chair->add_option("--synonyms", synonyms_path, "Synonym file");
  chair->add_flag("--json", eval_json, "Print JSON");
  auto* eret = eval->add_subcommand("retrieval", "ACC/RC/AHC/DHC of retrieved entities");
  eret->add_option("--instances", instances_path, "Instance JSON lines")->required();
  eret->add_option("--vocab", vocab_path, "Entity vocabulary (for caption inputs)");
  eret->add_option("--synonyms", synonyms_path, "Synonym file");
  eret->add_flag("--json", eval_json, "Print JSON");

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*ingest) {
      const Datastore store = ingest_datastore(captions, embeddings);
      save_datastore(store, store_out);
      out << "ingested " << store.size() << " records (dim " << store.dim() << ") into "
          << store_out << "\n";
    } else if (*retrieve) {
      if (query_key.empty() == query_vec.empty()) {
        throw Error(ErrorCode::kInvalidConfig, "give exactly one of --query-key, --query-vec");
      }
      const Datastore store = load_datastore(store_dir);
      std::optional<Embedding> query;
      if (!query_key.empty()) {
        const auto idx = store.find(query_key);
        if (!idx) throw Error(ErrorCode::kUnknownKey, "no record '" + query_key + "'");
        query = store.embedding(*idx);
      } else {
        query = read_query_vector(query_vec);
      }
      const auto result = store.retrieve(*query, k);
      if (retrieve_json) {
        out << to_json(result).dump() << "\n";
      } else {
        for (const auto& h : result.hits) {
          out << h.id << "\t" << fmt_score(h.score) << "\t" << h.caption << "\n";
        }
      }
    } else if (*runcmd) {
      ConfigFile cf = load_config(config_path);
      apply_overrides(ov, cf.config);
      cf.config.validate();
      const auto inputs = load_input_file(input_path);
      const auto res = load_resources(cf.resources, store_dir, cf.config);
      const auto outputs = run_batch(inputs, res, cf.config, err, threads);
      std::string lines, reports;
      for (const auto& o : outputs) {
        lines += output_json(o).dump() + "\n";
        auto r = to_json(o.context->suppression_report);
        r["id"] = o.id;
        reports += r.dump() + "\n";
      }
      write_file(out_path, lines);
      if (!report_path.empty()) write_file(report_path, reports);
      err << "wrote " << outputs.size() << " of " << inputs.size() << " instances to " << out_path
          << "\n";
    } else if (*chair) {
      const auto vocab = EntityVocabulary::load(vocab_path, synonyms_path);
      const auto report = evaluate(load_chair_instances(pred_path, &vocab));
      const auto j = to_json(report);
      if (eval_json) {
        out << j.dump() << "\n";
      } else {
        for (const char* key : {"instances", "chair_s", "chair_i", "recall", "total_hallucinations",
                                "retrieval_sourced", "model_sourced", "ratio_retrieval_sourced"}) {
          out << key << "\t" << j[key].dump() << "\n";
        }
      }
    } else if (*eret) {
      const auto vocab = maybe_vocab(vocab_path, synonyms_path);
      const auto diag =
          retrieval_diagnostics(load_retrieval_instances(instances_path, vocab ? &*vocab : nullptr));
      const auto j = to_json(diag);
      if (eval_json) {
        out << j.dump() << "\n";
      } else {
        for (const char* key : {"acc", "rc", "ahc", "dhc"}) out << key << "\t" << j[key].dump() << "\n";
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kInvariantViolation ? kExitInvariant : kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace nes::cli
