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

// Per-instance orchestration for the training and inference flows, plus an
// extractive stand-in decoder. The stand-in is not a language model: it
// picks (and if needed edits) one retrieved caption so that hallucination
// metrics can be computed end to end.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "nes/datastore.h"
#include "nes/embedder.h"
#include "nes/embedding.h"
#include "nes/entities.h"
#include "nes/fusion.h"
#include "nes/prefix_features.h"
#include "nes/suppression.h"

namespace nes {

inline constexpr std::size_t kDefaultPrefixLength = 10;
inline constexpr double kDefaultProportion = 0.01;

enum class Mode { kTraining, kInference };
std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

// Which embedding queries the datastore in training mode. kAuto uses the
// fused embedding when SIF is on, the raw synthetic embedding when it is
// off, and the caption's text embedding when SIR is off.
enum class TrainingQuery { kAuto, kFused, kSynthetic, kText };
std::string_view to_string(TrainingQuery q);
TrainingQuery parse_training_query(std::string_view name);

struct StageToggles {
  bool sir = true;
  bool sif = true;
  bool nef = true;
  bool as = true;
};

struct PipelineConfig {
  Mode mode = Mode::kTraining;
  std::size_t retrieval_k = kDefaultRetrievalK;
  FusionConfig fusion;
  SuppressionConfig suppression;
  double tau_sim = kDefaultTauSim;
  std::optional<std::size_t> top_m;
  std::uint64_t seed = 0;
  std::size_t prefix_length = kDefaultPrefixLength;
  StageToggles stages;
  TrainingQuery training_query = TrainingQuery::kAuto;

  // Throws kInvalidConfig. Suppression fields are only checked with AS on.
  void validate() const;
};

// Everything shared across instances; immutable once built.
struct PipelineResources {
  Datastore store;
  EntityVocabulary vocab;
  EmbeddingSource text_source;  // captions and entity prompts
  EmbeddingSource lookup;       // image_key / synthetic_key table
  AttentionWeights weights;

  // Throws kDimMismatch if the pieces disagree on d, or on L vs `config`.
  void check(const PipelineConfig& config) const;
};

// Stage tracing; called with a stage name as each stage starts.
struct PipelineHooks {
  std::function<void(std::string_view)> on_stage;
  void operator()(std::string_view stage) const {
    if (on_stage) on_stage(stage);
  }
};

struct GenerationContext {
  std::string id;
  Mode mode = Mode::kTraining;
  std::optional<double> clip_score;  // training only
  Embedding query{std::vector<float>{1.0f}};
  PrefixFeatures fused_input = PrefixFeatures::zeros(1, 1);
  PrefixFeatures attended = PrefixFeatures::zeros(1, 1);
  PrefixFeatures mapped_prefix = PrefixFeatures::zeros(1, 1);
  PrefixFeatures suppressed_prefix = PrefixFeatures::zeros(1, 1);
  std::string positive_prompt;
  EntitySets entity_sets;
  RetrievalResult retrieval;
  SuppressionReport suppression_report;
};

nlohmann::json to_json(const GenerationContext& ctx);

// Empty when every emitted-context invariant holds.
std::string check_invariants(const GenerationContext& ctx);

std::string build_prompt(const EntitySet& positive);

// True when the synthetic embedding is close enough to the caption's text
// embedding to be used at all.
bool passes_quality_gate(const Embedding& synthetic, const Embedding& text, double tau_quality,
                         double* score = nullptr);

// `synthetic` may be null when neither SIR nor SIF needs it.
GenerationContext run_training_instance(std::string_view caption, const Embedding* synthetic,
                                        const PipelineResources& res,
                                        const PipelineConfig& config,
                                        const PipelineHooks& hooks = {});

GenerationContext run_inference_instance(const Embedding& image, const PipelineResources& res,
                                         const PipelineConfig& config,
                                         const PipelineHooks& hooks = {});

// Throws kEmptyRetrieval.
std::string standin_decode(const GenerationContext& ctx, const Datastore& store,
                           const EntityVocabulary& vocab);

// One line of the batch input.
struct InputInstance {
  std::string id;
  std::optional<std::string> caption;
  std::optional<std::string> image_key;
  std::optional<std::string> synthetic_key;
  std::vector<std::string> references;
};

InputInstance parse_input_instance(const nlohmann::json& obj);
std::vector<InputInstance> load_input_file(const std::filesystem::path& path);

struct InstanceOutput {
  std::string id;
  std::optional<GenerationContext> context;  // empty when skipped
  std::string skip_reason;
  std::string generated;
  std::vector<std::string> references;
};

// Runs one instance; a quality-gate miss yields an output without context.
// Throws kInvariantViolation if the emitted context is inconsistent.
InstanceOutput run_instance(const InputInstance& in, const PipelineResources& res,
                            const PipelineConfig& config, const PipelineHooks& hooks = {});

// The JSON line written by `run` for an instance with a context.
nlohmann::json output_json(const InstanceOutput& out);

// Processes instances concurrently; results are in input order. Skipped
// instances are reported on `log` and left out. The first error (in input
// order) is rethrown.
std::vector<InstanceOutput> run_batch(const std::vector<InputInstance>& inputs,
                                      const PipelineResources& res, const PipelineConfig& config,
                                      std::ostream& log, std::size_t threads = 0);

// Config file handling. Relative resource paths resolve against `base_dir`.
struct ResourceSpec {
  std::filesystem::path vocab;
  std::filesystem::path synonyms;
  std::filesystem::path embeddings;
  std::filesystem::path weights;
  // text_source: hash-based (dim, seed) or a file-backed table.
  std::filesystem::path text_embeddings;
  std::optional<std::size_t> text_dim;
  std::uint64_t text_seed = 0;
};

struct ConfigFile {
  PipelineConfig config;
  ResourceSpec resources;
};

// Throws kFormatError on unknown keys or wrong types. Does not validate.
ConfigFile parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ConfigFile load_config(const std::filesystem::path& path);

PipelineResources load_resources(const ResourceSpec& spec, const std::filesystem::path& store_dir,
                                 const PipelineConfig& config);

}  // namespace nes
