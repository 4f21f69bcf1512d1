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
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nes/embedder.h"
#include "nes/embedding.h"

namespace nes {

inline constexpr double kDefaultTauSim = 0.2;

using EntitySet = std::set<std::string, std::less<>>;

// Canonical entity terms plus a surface-form -> canonical map. Surface forms
// are stored in token form, so "Hot-Dog" and "hot dog" are the same form.
class EntityVocabulary {
 public:
  // `synonyms` maps canonical -> surface forms. Throws kFormatError if a
  // synonym names an unknown canonical term or one surface form maps to two
  // canonical terms; kEmptyInput if no canonical terms remain.
  EntityVocabulary(const std::vector<std::string>& canonical,
                   const std::map<std::string, std::vector<std::string>>& synonyms = {});

  // Vocabulary file: one term per line. Synonym file: "canonical<TAB>a,b,c".
  // Blank lines and '#' comments are skipped in both.
  static EntityVocabulary load(const std::filesystem::path& vocab_file,
                               const std::filesystem::path& synonym_file = {});

  const EntitySet& canonical() const noexcept { return canonical_; }
  std::size_t size() const noexcept { return canonical_.size(); }

  // Canonical term for a surface form, or the input unchanged if unknown.
  std::string canonicalize(std::string_view term) const;
  bool is_canonical(std::string_view term) const { return canonical_.count(term) > 0; }

  // surface form (normalized, space-joined tokens) -> canonical term.
  const std::map<std::string, std::string, std::less<>>& surface_forms() const noexcept {
    return surface_;
  }

  using TokenRun = std::pair<std::vector<std::string>, std::string>;

  // Surface forms whose first token is `token`, longest first; may be null.
  const std::vector<TokenRun>* runs_starting_with(std::string_view token) const;

 private:
  void add_surface(const std::string& form, const std::string& canonical);

  EntitySet canonical_;
  std::map<std::string, std::string, std::less<>> surface_;
  // first token -> (token run, canonical), longest run first.
  std::map<std::string, std::vector<TokenRun>, std::less<>> by_first_token_;
};

// A matched surface form: token range [first, last) and byte range in the
// source text.
struct EntityMention {
  std::string canonical;
  std::size_t first_token = 0;
  std::size_t last_token = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Whole-token, longest-match-first scan of `caption`.
std::vector<EntityMention> find_mentions(std::string_view caption, const EntityVocabulary& vocab);

EntitySet extract_entities(std::string_view caption, const EntityVocabulary& vocab);

// Maps every term through the synonym table; unknown terms are kept as-is.
EntitySet canonicalize_all(const EntitySet& terms, const EntityVocabulary& vocab);

// Zero-shot classification: canonical terms ranked by cosine between
// `image` and embed_entity(term), ties by ascending term. Returns at most
// `top_m` terms.
std::vector<std::string> classify_image_entities(const Embedding& image,
                                                 const EntityVocabulary& vocab,
                                                 const EmbeddingSource& source,
                                                 std::size_t top_m);

struct EntitySets {
  EntitySet key;
  EntitySet candidates;
  EntitySet filtered;
  EntitySet positive;
  EntitySet negative;

  friend bool operator==(const EntitySets&, const EntitySets&) = default;
};

nlohmann::json to_json(const EntitySets& sets);

// Empty string when all EntitySets invariants hold, else a description of
// the first violation.
std::string check_invariants(const EntitySets& sets);

// Ground-truth filtering: positive = key, negative = candidates \ key.
EntitySets filter_training(const EntitySet& key, const EntitySet& candidates);

// Similarity filtering: a candidate outside `key` becomes positive iff
// cos(embed_entity(e), image) > tau_sim (strictly); the rest are negative.
EntitySets filter_inference(const EntitySet& key, const EntitySet& candidates,
                            const Embedding& image, const EmbeddingSource& source,
                            double tau_sim = kDefaultTauSim);

// NEF disabled: every candidate passes, nothing is negative.
EntitySets pass_through(const EntitySet& key, const EntitySet& candidates);

}  // namespace nes
