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

#include "nes/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <ostream>
#include <set>
#include <thread>

#include "nes/error.h"
#include "nes/text.h"

namespace nes {
namespace {

std::vector<Embedding> retrieved_embeddings(const RetrievalResult& r, const Datastore& store) {
  std::vector<Embedding> out;
  out.reserve(r.size());
  for (const auto& hit : r.hits) {
    const auto idx = store.find(hit.id);
    if (!idx) throw Error(ErrorCode::kUnknownKey, "retrieved id '" + hit.id + "' not in store");
    out.push_back(store.embedding(*idx));
  }
  return out;
}

EntitySet candidate_entities(const RetrievalResult& r, const EntityVocabulary& vocab) {
  EntitySet out;
  for (const auto& hit : r.hits) out.merge(extract_entities(hit.caption, vocab));
  return out;
}

// Shared tail of both flows: fusion with retrieved captions, mapping,
// suppression and the prompt.
void finish(GenerationContext& ctx, const Embedding& fused, const PipelineResources& res,
            const PipelineConfig& config, const PipelineHooks& hooks) {
  ctx.fused_input = PrefixFeatures::from_embedding(fused);
  const auto retrieved = retrieved_embeddings(ctx.retrieval, res.store);

  hooks("fuse_retrieval");
  ctx.attended = fuse_retrieval(ctx.fused_input, retrieved, res.weights);
  hooks("map_to_prefix");
  ctx.mapped_prefix = map_to_prefix(ctx.attended, res.weights);

  std::vector<Embedding> negatives;
  for (const auto& e : ctx.entity_sets.negative) negatives.push_back(embed_entity(res.text_source, e));

  hooks("score_negative_attention");
  ctx.suppression_report.scores = score_negative_attention(ctx.mapped_prefix, negatives);
  if (config.stages.as && !negatives.empty()) {
    hooks("select_tokens");
    ctx.suppression_report.selected =
        select_tokens(ctx.suppression_report.scores, negatives.size(), config.suppression);
    ctx.suppression_report.lambda_applied = config.suppression.lambda;
    hooks("suppress");
    ctx.suppressed_prefix = suppress(ctx.mapped_prefix, ctx.suppression_report.selected,
                                     config.suppression.lambda);
  } else {
    ctx.suppression_report.lambda_applied = 1.0;
    ctx.suppressed_prefix = ctx.mapped_prefix;
  }
  ctx.positive_prompt = build_prompt(ctx.entity_sets.positive);
}

bool is_punct(char c) {
  return c == ',' || c == '.' || c == ';' || c == ':' || c == '!' || c == '?';
}

std::string tidy(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (space) {
      if (!out.empty() && out.back() != ' ') out.push_back(' ');
      continue;
    }
    if (is_punct(c) && !out.empty() && out.back() == ' ') out.pop_back();
    out.push_back(c);
  }
  return std::string(trim(out));
}

std::string strip_negatives(std::string_view caption, const EntitySet& negative,
                            const EntityVocabulary& vocab) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& m : find_mentions(caption, vocab)) {
    if (!negative.count(m.canonical)) continue;
    out.append(caption.substr(pos, m.begin - pos));
    out.push_back(' ');
    pos = m.end;
  }
  out.append(caption.substr(pos));
  return tidy(out);
}

using Keys = std::set<std::string, std::less<>>;

void check_keys(const nlohmann::json& obj, const Keys& allowed, std::string_view where) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::kFormatError, std::string(where) + " must be an object");
  }
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) {
      throw Error(ErrorCode::kFormatError, "unknown key '" + k + "' in " + std::string(where));
    }
  }
}

double get_real(const nlohmann::json& v, std::string_view name) {
  if (!v.is_number()) throw Error(ErrorCode::kFormatError, std::string(name) + " must be a number");
  return v.get<double>();
}

std::uint64_t get_count(const nlohmann::json& v, std::string_view name) {
  if (!v.is_number_unsigned()) {
    throw Error(ErrorCode::kFormatError, std::string(name) + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const nlohmann::json& v, std::string_view name) {
  if (!v.is_boolean()) throw Error(ErrorCode::kFormatError, std::string(name) + " must be a boolean");
  return v.get<bool>();
}

std::string get_string(const nlohmann::json& v, std::string_view name) {
  if (!v.is_string()) throw Error(ErrorCode::kFormatError, std::string(name) + " must be a string");
  return v.get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::kTraining ? "training" : "inference"; }

Mode parse_mode(std::string_view name) {
  if (name == "training") return Mode::kTraining;
  if (name == "inference") return Mode::kInference;
  throw Error(ErrorCode::kInvalidConfig, "unknown mode '" + std::string(name) + "'");
}

std::string_view to_string(TrainingQuery q) {
  switch (q) {
    case TrainingQuery::kAuto: return "auto";
    case TrainingQuery::kFused: return "fused";
    case TrainingQuery::kSynthetic: return "synthetic";
    case TrainingQuery::kText: return "text";
  }
  return "unknown";
}

TrainingQuery parse_training_query(std::string_view name) {
  if (name == "auto") return TrainingQuery::kAuto;
  if (name == "fused") return TrainingQuery::kFused;
  if (name == "synthetic") return TrainingQuery::kSynthetic;
  if (name == "text") return TrainingQuery::kText;
  throw Error(ErrorCode::kInvalidConfig, "unknown training_query '" + std::string(name) + "'");
}

void PipelineConfig::validate() const {
  if (retrieval_k == 0) throw Error(ErrorCode::kInvalidConfig, "retrieval_k must be >= 1");
  if (prefix_length == 0) throw Error(ErrorCode::kInvalidConfig, "prefix_length must be >= 1");
  if (!std::isfinite(tau_sim)) throw Error(ErrorCode::kInvalidConfig, "tau_sim must be finite");
  if (top_m && *top_m == 0) throw Error(ErrorCode::kInvalidConfig, "top_m must be >= 1");
  if (mode == Mode::kInference && !top_m) {
    throw Error(ErrorCode::kInvalidConfig, "inference mode requires top_m");
  }
  fusion.validate();
  if (stages.as) suppression.validate();
}

void PipelineResources::check(const PipelineConfig& config) const {
  const std::size_t d = store.dim();
  auto fail = [&](const std::string& what, std::size_t got) {
    throw Error(ErrorCode::kDimMismatch,
                what + " dim " + std::to_string(got) + " vs store dim " + std::to_string(d));
  };
  if (text_source.dim() != d) fail("text source", text_source.dim());
  if (lookup.dim() != d) fail("embedding table", lookup.dim());
  if (weights.dim() != d) fail("weights", weights.dim());
  if (weights.prefix_length() != config.prefix_length) {
    throw Error(ErrorCode::kDimMismatch,
                "weights prefix length " + std::to_string(weights.prefix_length()) +
                    " vs configured " + std::to_string(config.prefix_length));
  }
}

nlohmann::json to_json(const GenerationContext& ctx) {
  nlohmann::json j = {{"id", ctx.id},
                      {"mode", std::string(to_string(ctx.mode))},
                      {"positive_prompt", ctx.positive_prompt},
                      {"entity_sets", to_json(ctx.entity_sets)},
                      {"retrieval", to_json(ctx.retrieval)},
                      {"suppression_report", to_json(ctx.suppression_report)},
                      {"suppressed_prefix", to_json(ctx.suppressed_prefix)}};
  if (ctx.clip_score) j["clip_score"] = *ctx.clip_score;
  return j;
}

std::string check_invariants(const GenerationContext& ctx) {
  if (auto e = check_invariants(ctx.entity_sets); !e.empty()) return "entity sets: " + e;
  if (auto e = check_invariants(ctx.suppression_report, ctx.suppressed_prefix.length());
      !e.empty()) {
    return "suppression: " + e;
  }
  if (ctx.positive_prompt != build_prompt(ctx.entity_sets.positive)) {
    return "prompt does not match positive entities";
  }
  if (ctx.suppressed_prefix.length() != ctx.mapped_prefix.length() ||
      ctx.suppressed_prefix.width() != ctx.mapped_prefix.width()) {
    return "suppression changed the prefix shape";
  }
  return {};
}

std::string build_prompt(const EntitySet& positive) {
  if (positive.empty()) return "There is something in the image.";
  std::string out = "There are ";
  bool first = true;
  for (const auto& e : positive) {
    if (!first) out += ", ";
    out += e;
    first = false;
  }
  return out + " in the image.";
}

bool passes_quality_gate(const Embedding& synthetic, const Embedding& text, double tau_quality,
                         double* score) {
  const double s = clip_score(synthetic, text);
  if (score) *score = s;
  return s >= tau_quality;
}

GenerationContext run_training_instance(std::string_view caption, const Embedding* synthetic,
                                        const PipelineResources& res,
                                        const PipelineConfig& config, const PipelineHooks& hooks) {
  GenerationContext ctx;
  ctx.mode = Mode::kTraining;
  const Embedding text = embed_text(res.text_source, caption);

  TrainingQuery q = config.training_query;
  if (q == TrainingQuery::kAuto) {
    q = !config.stages.sir ? TrainingQuery::kText
        : config.stages.sif ? TrainingQuery::kFused
                            : TrainingQuery::kSynthetic;
  }
  const bool needs_synthetic =
      config.stages.sif || q == TrainingQuery::kFused || q == TrainingQuery::kSynthetic;
  if (needs_synthetic && !synthetic) {
    throw Error(ErrorCode::kFormatError, "training instance needs a synthetic embedding");
  }
  if (synthetic) ctx.clip_score = clip_score(*synthetic, text);

  std::optional<Embedding> fused;
  if (config.stages.sif || q == TrainingQuery::kFused) {
    hooks("fuse_sif");
    fused = fuse_sif(*synthetic, text, config.fusion);
  }
  const Embedding input = config.stages.sif ? *fused : text;
  switch (q) {
    case TrainingQuery::kFused: ctx.query = *fused; break;
    case TrainingQuery::kSynthetic: ctx.query = synthetic->normalized(); break;
    default: ctx.query = text; break;
  }

  hooks("retrieve");
  ctx.retrieval = res.store.retrieve(ctx.query, config.retrieval_k);
  hooks("extract_entities");
  const EntitySet key = extract_entities(caption, res.vocab);
  const EntitySet candidates = candidate_entities(ctx.retrieval, res.vocab);
  if (config.stages.nef) {
    hooks("filter_training");
    ctx.entity_sets = filter_training(key, candidates);
  } else {
    hooks("pass_through");
    ctx.entity_sets = pass_through(key, candidates);
  }
  finish(ctx, input, res, config, hooks);
  return ctx;
}

GenerationContext run_inference_instance(const Embedding& image, const PipelineResources& res,
                                         const PipelineConfig& config, const PipelineHooks& hooks) {
  if (!config.top_m) throw Error(ErrorCode::kInvalidConfig, "inference mode requires top_m");
  GenerationContext ctx;
  ctx.mode = Mode::kInference;
  ctx.query = image.normalized();

  hooks("retrieve");
  ctx.retrieval = res.store.retrieve(ctx.query, config.retrieval_k);
  hooks("classify_image_entities");
  const auto top = classify_image_entities(ctx.query, res.vocab, res.text_source, *config.top_m);
  const EntitySet key(top.begin(), top.end());
  hooks("extract_entities");
  const EntitySet candidates = candidate_entities(ctx.retrieval, res.vocab);
  if (config.stages.nef) {
    hooks("filter_inference");
    ctx.entity_sets = filter_inference(key, candidates, ctx.query, res.text_source, config.tau_sim);
  } else {
    hooks("pass_through");
    ctx.entity_sets = pass_through(key, candidates);
  }
  finish(ctx, ctx.query, res, config, hooks);
  return ctx;
}

std::string standin_decode(const GenerationContext& ctx, const Datastore& store,
                           const EntityVocabulary& vocab) {
  if (ctx.retrieval.empty()) throw Error(ErrorCode::kEmptyRetrieval, "nothing to decode from");
  const auto mean = ctx.suppressed_prefix.mean_token();
  double mean_norm = 0.0;
  for (double x : mean) mean_norm += x * x;
  mean_norm = std::sqrt(mean_norm);

  struct Candidate {
    double score;
    const RetrievalHit* hit;
    bool clean;
  };
  std::vector<Candidate> cands;
  for (const auto& hit : ctx.retrieval.hits) {
    const auto idx = store.find(hit.id);
    if (!idx) throw Error(ErrorCode::kUnknownKey, "retrieved id '" + hit.id + "' not in store");
    const auto v = store.vector(*idx);
    if (v.size() != mean.size()) {
      throw Error(ErrorCode::kDimMismatch, "prefix width differs from store dim");
    }
    double s = 0.0;
    if (mean_norm > 0.0) {
      for (std::size_t i = 0; i < v.size(); ++i) s += mean[i] * static_cast<double>(v[i]);
      s /= mean_norm;
    }
    bool clean = true;
    for (const auto& e : extract_entities(hit.caption, vocab)) {
      if (ctx.entity_sets.negative.count(e)) {
        clean = false;
        break;
      }
    }
    cands.push_back({s, &hit, clean});
  }
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.hit->id < b.hit->id;
  };
  std::sort(cands.begin(), cands.end(), better);
  for (const auto& c : cands) {
    if (c.clean) return c.hit->caption;
  }
  return strip_negatives(cands.front().hit->caption, ctx.entity_sets.negative, vocab);
}

InputInstance parse_input_instance(const nlohmann::json& obj) {
  check_keys(obj, {"id", "caption", "image_key", "synthetic_key", "references"}, "input instance");
  InputInstance in;
  if (!obj.contains("id")) throw Error(ErrorCode::kFormatError, "input instance without 'id'");
  in.id = get_string(obj.at("id"), "id");
  if (obj.contains("caption")) in.caption = get_string(obj.at("caption"), "caption");
  if (obj.contains("image_key")) in.image_key = get_string(obj.at("image_key"), "image_key");
  if (obj.contains("synthetic_key")) {
    in.synthetic_key = get_string(obj.at("synthetic_key"), "synthetic_key");
  }
  if (obj.contains("references")) {
    const auto& refs = obj.at("references");
    if (!refs.is_array()) throw Error(ErrorCode::kFormatError, "references must be an array");
    for (const auto& r : refs) in.references.push_back(get_string(r, "reference"));
  }
  return in;
}

std::vector<InputInstance> load_input_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<InputInstance> out;
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    try {
      out.push_back(parse_input_instance(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormatError, where + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
    if (!seen.insert(out.back().id).second) {
      throw Error(ErrorCode::kDuplicateId, where + "duplicate id '" + out.back().id + "'");
    }
  }
  return out;
}

InstanceOutput run_instance(const InputInstance& in, const PipelineResources& res,
                            const PipelineConfig& config, const PipelineHooks& hooks) {
  InstanceOutput out;
  out.id = in.id;
  out.references = in.references;
  auto lookup = [&](const std::optional<std::string>& key, const char* name) {
    if (!key) throw Error(ErrorCode::kFormatError, "instance '" + in.id + "' has no " + name);
    const auto it = res.lookup.entries().find(*key);
    if (it == res.lookup.entries().end()) {
      throw Error(ErrorCode::kUnknownKey, "no embedding for " + std::string(name) + " '" + *key + "'");
    }
    return it->second;
  };

  if (config.mode == Mode::kTraining) {
    if (!in.caption) throw Error(ErrorCode::kFormatError, "instance '" + in.id + "' has no caption");
    if (out.references.empty()) out.references.push_back(*in.caption);
    std::optional<Embedding> synthetic;
    if (in.synthetic_key) synthetic = lookup(in.synthetic_key, "synthetic_key");
    if (synthetic) {
      const Embedding text = embed_text(res.text_source, *in.caption);
      double score = 0.0;
      hooks("quality_gate");
      if (!passes_quality_gate(*synthetic, text, config.fusion.tau_quality, &score)) {
        out.skip_reason = "clip score " + std::to_string(score) + " below tau_quality";
        return out;
      }
    }
    out.context = run_training_instance(*in.caption, synthetic ? &*synthetic : nullptr, res,
                                        config, hooks);
  } else {
    out.context = run_inference_instance(lookup(in.image_key, "image_key"), res, config, hooks);
  }
  out.context->id = in.id;
  if (auto why = check_invariants(*out.context); !why.empty()) {
    throw Error(ErrorCode::kInvariantViolation, "instance '" + in.id + "': " + why);
  }
  out.generated = standin_decode(*out.context, res.store, res.vocab);
  return out;
}

nlohmann::json output_json(const InstanceOutput& out) {
  nlohmann::json j = to_json(*out.context);
  std::vector<std::string> retrieved;
  for (const auto& h : out.context->retrieval.hits) retrieved.push_back(h.caption);
  j["generated"] = out.generated;
  j["references"] = out.references;
  j["retrieved"] = retrieved;
  return j;
}

std::vector<InstanceOutput> run_batch(const std::vector<InputInstance>& inputs,
                                      const PipelineResources& res, const PipelineConfig& config,
                                      std::ostream& log, std::size_t threads) {
  config.validate();
  res.check(config);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(inputs.size(), 1));

  std::vector<std::optional<InstanceOutput>> results(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      try {
        results[i] = run_instance(inputs[i], res, config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::vector<InstanceOutput> out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    if (!results[i]->context) {
      log << "skipped " << results[i]->id << ": " << results[i]->skip_reason << "\n";
      continue;
    }
    out.push_back(std::move(*results[i]));
  }
  return out;
}

ConfigFile parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"mode", "retrieval_k", "tau_sim", "top_m", "seed", "prefix_length", "training_query",
              "stages", "fusion", "suppression", "resources"},
             "config");
  ConfigFile cf;
  auto& c = cf.config;
  if (j.contains("mode")) c.mode = parse_mode(get_string(j["mode"], "mode"));
  if (j.contains("retrieval_k")) c.retrieval_k = get_count(j["retrieval_k"], "retrieval_k");
  if (j.contains("tau_sim")) c.tau_sim = get_real(j["tau_sim"], "tau_sim");
  if (j.contains("top_m") && !j["top_m"].is_null()) c.top_m = get_count(j["top_m"], "top_m");
  if (j.contains("seed")) c.seed = get_count(j["seed"], "seed");
  if (j.contains("prefix_length")) c.prefix_length = get_count(j["prefix_length"], "prefix_length");
  if (j.contains("training_query")) {
    c.training_query = parse_training_query(get_string(j["training_query"], "training_query"));
  }

  if (j.contains("stages")) {
    const auto& s = j["stages"];
    check_keys(s, {"sir", "sif", "nef", "as"}, "stages");
    if (s.contains("sir")) c.stages.sir = get_bool(s["sir"], "stages.sir");
    if (s.contains("sif")) c.stages.sif = get_bool(s["sif"], "stages.sif");
    if (s.contains("nef")) c.stages.nef = get_bool(s["nef"], "stages.nef");
    if (s.contains("as")) c.stages.as = get_bool(s["as"], "stages.as");
  }

  if (j.contains("fusion")) {
    const auto& f = j["fusion"];
    check_keys(f, {"strategy", "alpha", "tau_quality"}, "fusion");
    if (f.contains("strategy")) {
      c.fusion.strategy = parse_fusion_strategy(get_string(f["strategy"], "fusion.strategy"));
    }
    if (f.contains("alpha") && !f["alpha"].is_null()) c.fusion.alpha = get_real(f["alpha"], "fusion.alpha");
    if (f.contains("tau_quality")) c.fusion.tau_quality = get_real(f["tau_quality"], "fusion.tau_quality");
  }

  if (j.contains("suppression")) {
    const auto& s = j["suppression"];
    check_keys(s, {"strategy", "tau_neg", "lambda", "proportion"}, "suppression");
    if (s.contains("strategy")) {
      c.suppression.strategy =
          parse_suppression_strategy(get_string(s["strategy"], "suppression.strategy"));
    }
    if (s.contains("tau_neg") && !s["tau_neg"].is_null()) {
      c.suppression.tau_neg = get_real(s["tau_neg"], "suppression.tau_neg");
    }
    if (s.contains("lambda")) c.suppression.lambda = get_real(s["lambda"], "suppression.lambda");
    if (s.contains("proportion") && !s["proportion"].is_null()) {
      c.suppression.proportion = get_real(s["proportion"], "suppression.proportion");
    }
  }
  if (c.suppression.strategy == SuppressionStrategy::kProportional && !c.suppression.proportion) {
    c.suppression.proportion = kDefaultProportion;
  }

  if (j.contains("resources")) {
    const auto& r = j["resources"];
    check_keys(r, {"vocab", "synonyms", "embeddings", "weights", "text_source"}, "resources");
    auto path = [&](const char* key) -> std::filesystem::path {
      if (!r.contains(key)) return {};
      return resolve(base_dir, get_string(r[key], std::string("resources.") + key));
    };
    cf.resources.vocab = path("vocab");
    cf.resources.synonyms = path("synonyms");
    cf.resources.embeddings = path("embeddings");
    cf.resources.weights = path("weights");
    if (r.contains("text_source")) {
      const auto& t = r["text_source"];
      check_keys(t, {"kind", "dim", "seed", "path"}, "resources.text_source");
      const std::string kind = t.contains("kind") ? get_string(t["kind"], "text_source.kind") : "hash";
      if (kind == "hash") {
        if (t.contains("path")) throw Error(ErrorCode::kFormatError, "hash text_source takes no path");
        if (t.contains("dim")) cf.resources.text_dim = get_count(t["dim"], "text_source.dim");
        if (t.contains("seed")) cf.resources.text_seed = get_count(t["seed"], "text_source.seed");
      } else if (kind == "file") {
        if (!t.contains("path")) throw Error(ErrorCode::kFormatError, "file text_source needs a path");
        cf.resources.text_embeddings = resolve(base_dir, get_string(t["path"], "text_source.path"));
      } else {
        throw Error(ErrorCode::kFormatError, "unknown text_source kind '" + kind + "'");
      }
    }
  }
  return cf;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

PipelineResources load_resources(const ResourceSpec& spec, const std::filesystem::path& store_dir,
                                 const PipelineConfig& config) {
  if (spec.vocab.empty()) throw Error(ErrorCode::kInvalidConfig, "resources.vocab is required");
  Datastore store = load_datastore(store_dir);
  EntityVocabulary vocab = EntityVocabulary::load(spec.vocab, spec.synonyms);
  EmbeddingSource text = spec.text_embeddings.empty()
                             ? EmbeddingSource::hash_based(spec.text_dim.value_or(store.dim()),
                                                           spec.text_seed)
                             : load_embedding_file(spec.text_embeddings);
  EmbeddingSource lookup = spec.embeddings.empty()
                               ? EmbeddingSource::file_backed({}, store.dim())
                               : load_embedding_file(spec.embeddings, store.dim());
  AttentionWeights weights = spec.weights.empty()
                                 ? AttentionWeights::xavier(store.dim(), config.prefix_length,
                                                            config.seed)
                                 : load_weights_file(spec.weights);
  PipelineResources res{std::move(store), std::move(vocab), std::move(text), std::move(lookup),
                        std::move(weights)};
  res.check(config);
  return res;
}

}  // namespace nes
