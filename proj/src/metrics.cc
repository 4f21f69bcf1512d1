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

#include "nes/metrics.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>

#include "nes/error.h"
#include "nes/text.h"

namespace nes {
namespace {

void require_nonempty(std::span<const EvalInstance> instances) {
  if (instances.empty()) throw Error(ErrorCode::kEmptyInput, "no evaluation instances");
}

std::int64_t count_missing(const EntitySet& from, const EntitySet& in) {
  std::int64_t n = 0;
  for (const auto& e : from) n += in.count(e) ? 0 : 1;
  return n;
}

std::int64_t count_common(const EntitySet& a, const EntitySet& b) {
  return static_cast<std::int64_t>(a.size()) - count_missing(a, b);
}

std::int64_t parse_int(std::string_view s, std::string_view whole) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::kFormatError, "bad fraction '" + std::string(whole) + "'");
  }
  return v;
}

nlohmann::json fraction_json(const Fraction& f) { return f.value(); }

const nlohmann::json& field(const nlohmann::json& obj, const char* a, const char* b,
                            const char** which) {
  if (obj.contains(a)) {
    *which = a;
    return obj.at(a);
  }
  if (b && obj.contains(b)) {
    *which = b;
    return obj.at(b);
  }
  static const nlohmann::json kNull;
  *which = nullptr;
  return kNull;
}

std::vector<std::string> string_array(const nlohmann::json& v, const char* name) {
  if (!v.is_array()) throw Error(ErrorCode::kFormatError, std::string("'") + name + "' must be an array");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) {
      throw Error(ErrorCode::kFormatError, std::string("'") + name + "' must hold strings");
    }
    out.push_back(x.get<std::string>());
  }
  return out;
}

EntitySet entity_array(const nlohmann::json& v, const char* name, const EntityVocabulary* vocab) {
  EntitySet out;
  for (auto& s : string_array(v, name)) {
    const auto t = trim(s);
    if (t.empty()) continue;
    out.insert(vocab ? vocab->canonicalize(t) : std::string(t));
  }
  return out;
}

EntitySet caption_array(const nlohmann::json& v, const char* name, const EntityVocabulary* vocab) {
  if (!vocab) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("'") + name + "' holds captions; a vocabulary is required");
  }
  EntitySet out;
  for (const auto& c : string_array(v, name)) out.merge(extract_entities(c, *vocab));
  return out;
}

template <typename Parse>
std::vector<EvalInstance> load_jsonl(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<EvalInstance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormatError,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::kFormatError,
                  path.string() + ":" + std::to_string(lineno) + ": expected an object");
    }
    out.push_back(parse(obj));
  }
  return out;
}

}  // namespace

Fraction::Fraction(std::int64_t num, std::int64_t den) {
  if (den == 0) throw Error(ErrorCode::kInvalidConfig, "zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

Fraction Fraction::parse(std::string_view text) {
  const auto t = trim(text);
  const auto slash = t.find('/');
  if (slash == std::string_view::npos) return Fraction(parse_int(t, text), 1);
  return Fraction(parse_int(trim(t.substr(0, slash)), text), parse_int(trim(t.substr(slash + 1)), text));
}

std::string Fraction::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Fraction ratio_or_zero(std::int64_t num, std::int64_t den) {
  return den == 0 ? Fraction() : Fraction(num, den);
}

ChairScores chair_scores(std::span<const EvalInstance> instances) {
  require_nonempty(instances);
  std::int64_t hallucinated_sentences = 0;
  std::int64_t hallucinated = 0;
  std::int64_t generated = 0;
  for (const auto& inst : instances) {
    const auto h = count_missing(inst.generated, inst.ground_truth);
    hallucinated_sentences += h > 0 ? 1 : 0;
    hallucinated += h;
    generated += static_cast<std::int64_t>(inst.generated.size());
  }
  return {Fraction(hallucinated_sentences, static_cast<std::int64_t>(instances.size())),
          ratio_or_zero(hallucinated, generated)};
}

Fraction entity_recall(std::span<const EvalInstance> instances) {
  require_nonempty(instances);
  std::int64_t hit = 0;
  std::int64_t total = 0;
  for (const auto& inst : instances) {
    hit += count_common(inst.ground_truth, inst.generated);
    total += static_cast<std::int64_t>(inst.ground_truth.size());
  }
  if (total == 0) throw Error(ErrorCode::kNoGroundTruth, "no ground-truth entities");
  return Fraction(hit, total);
}

Attribution attribute_hallucinations(std::span<const EvalInstance> instances) {
  require_nonempty(instances);
  Attribution a;
  for (const auto& inst : instances) {
    for (const auto& e : inst.generated) {
      if (inst.ground_truth.count(e)) continue;
      ++a.total;
      if (inst.retrieved.count(e)) {
        ++a.retrieval_sourced;
      } else {
        ++a.model_sourced;
      }
    }
  }
  a.ratio = ratio_or_zero(a.retrieval_sourced, a.total);
  return a;
}

RetrievalDiagnostics retrieval_diagnostics(std::span<const EvalInstance> instances) {
  require_nonempty(instances);
  std::int64_t correct = 0;
  std::int64_t retrieved = 0;
  std::int64_t truth = 0;
  std::int64_t wrong = 0;
  EntitySet distinct_wrong;
  for (const auto& inst : instances) {
    correct += count_common(inst.retrieved, inst.ground_truth);
    retrieved += static_cast<std::int64_t>(inst.retrieved.size());
    truth += static_cast<std::int64_t>(inst.ground_truth.size());
    for (const auto& e : inst.retrieved) {
      if (inst.ground_truth.count(e)) continue;
      ++wrong;
      distinct_wrong.insert(e);
    }
  }
  RetrievalDiagnostics d;
  d.acc = ratio_or_zero(correct, retrieved);
  d.rc = ratio_or_zero(correct, truth);
  d.ahc = Fraction(wrong, static_cast<std::int64_t>(instances.size()));
  d.dhc = static_cast<std::int64_t>(distinct_wrong.size());
  return d;
}

EvalReport evaluate(std::span<const EvalInstance> instances) {
  EvalReport r;
  const auto chair = chair_scores(instances);
  r.instances = instances.size();
  r.chair_s = chair.chair_s;
  r.chair_i = chair.chair_i;
  try {
    r.recall = entity_recall(instances);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoGroundTruth) throw;
  }
  r.attribution = attribute_hallucinations(instances);
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json exact = {{"chair_s", r.chair_s.str()},
                          {"chair_i", r.chair_i.str()},
                          {"recall", r.recall ? nlohmann::json(r.recall->str()) : nlohmann::json()},
                          {"ratio_retrieval_sourced", r.attribution.ratio.str()}};
  return {{"instances", r.instances},
          {"chair_s", fraction_json(r.chair_s)},
          {"chair_i", fraction_json(r.chair_i)},
          {"recall", r.recall ? fraction_json(*r.recall) : nlohmann::json()},
          {"total_hallucinations", r.attribution.total},
          {"retrieval_sourced", r.attribution.retrieval_sourced},
          {"model_sourced", r.attribution.model_sourced},
          {"ratio_retrieval_sourced", fraction_json(r.attribution.ratio)},
          {"exact", exact}};
}

nlohmann::json to_json(const RetrievalDiagnostics& d) {
  return {{"acc", fraction_json(d.acc)},
          {"rc", fraction_json(d.rc)},
          {"ahc", fraction_json(d.ahc)},
          {"dhc", d.dhc},
          {"exact", {{"acc", d.acc.str()}, {"rc", d.rc.str()}, {"ahc", d.ahc.str()}}}};
}

EvalInstance parse_chair_instance(const nlohmann::json& obj, const EntityVocabulary* vocab) {
  EvalInstance inst;
  const char* which = nullptr;

  const auto& gen = field(obj, "generated", nullptr, &which);
  if (!which) throw Error(ErrorCode::kFormatError, "missing 'generated'");
  if (gen.is_string()) {
    if (!vocab) throw Error(ErrorCode::kInvalidConfig, "'generated' is a caption; a vocabulary is required");
    inst.generated = extract_entities(gen.get<std::string>(), *vocab);
  } else {
    inst.generated = entity_array(gen, "generated", vocab);
  }

  const auto& gt = field(obj, "references", "ground_truth", &which);
  if (!which) throw Error(ErrorCode::kFormatError, "missing 'references'");
  inst.ground_truth = std::string_view(which) == "references" ? caption_array(gt, which, vocab)
                                                              : entity_array(gt, which, vocab);

  const auto& ret = field(obj, "retrieved", "retrieved_entities", &which);
  if (which) {
    inst.retrieved = std::string_view(which) == "retrieved" ? caption_array(ret, which, vocab)
                                                            : entity_array(ret, which, vocab);
  }
  return inst;
}

EvalInstance parse_retrieval_instance(const nlohmann::json& obj, const EntityVocabulary* vocab) {
  EvalInstance inst;
  const char* which = nullptr;

  const auto& ret = field(obj, "retrieved", "retrieved_captions", &which);
  if (!which) throw Error(ErrorCode::kFormatError, "missing 'retrieved'");
  inst.retrieved = std::string_view(which) == "retrieved" ? entity_array(ret, which, vocab)
                                                          : caption_array(ret, which, vocab);

  const auto& gt = field(obj, "ground_truth", "references", &which);
  if (!which) throw Error(ErrorCode::kFormatError, "missing 'ground_truth'");
  inst.ground_truth = std::string_view(which) == "ground_truth" ? entity_array(gt, which, vocab)
                                                                : caption_array(gt, which, vocab);
  return inst;
}

std::vector<EvalInstance> load_chair_instances(const std::filesystem::path& path,
                                               const EntityVocabulary* vocab) {
  return load_jsonl(path, [&](const nlohmann::json& o) { return parse_chair_instance(o, vocab); });
}

std::vector<EvalInstance> load_retrieval_instances(const std::filesystem::path& path,
                                                   const EntityVocabulary* vocab) {
  return load_jsonl(path,
                    [&](const nlohmann::json& o) { return parse_retrieval_instance(o, vocab); });
}

}  // namespace nes
