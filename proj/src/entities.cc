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

#include "nes/entities.h"

#include <algorithm>
#include <fstream>

#include "nes/error.h"
#include "nes/text.h"

namespace nes {
namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::string normalize_form(std::string_view term) { return join_tokens(token_strings(term)); }

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    lines.emplace_back(t);
  }
  return lines;
}

void check_dim(const Embedding& image, const EmbeddingSource& source) {
  if (image.dim() != source.dim()) {
    throw Error(ErrorCode::kDimMismatch, "image dim " + std::to_string(image.dim()) +
                                             " vs entity source dim " +
                                             std::to_string(source.dim()));
  }
}

EntitySet set_difference(const EntitySet& a, const EntitySet& b) {
  EntitySet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

bool includes(const EntitySet& super, const EntitySet& sub) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

nlohmann::json set_json(const EntitySet& s) { return nlohmann::json(std::vector<std::string>(s.begin(), s.end())); }

}  // namespace

EntityVocabulary::EntityVocabulary(const std::vector<std::string>& canonical,
                                   const std::map<std::string, std::vector<std::string>>& synonyms) {
  for (const auto& term : canonical) {
    const std::string form = normalize_form(term);
    if (form.empty()) continue;
    canonical_.insert(form);
    add_surface(form, form);
  }
  if (canonical_.empty()) throw Error(ErrorCode::kEmptyInput, "entity vocabulary is empty");
  for (const auto& [canon, forms] : synonyms) {
    const std::string c = normalize_form(canon);
    if (!canonical_.count(c)) {
      throw Error(ErrorCode::kFormatError, "synonyms for unknown term '" + canon + "'");
    }
    for (const auto& f : forms) {
      const std::string form = normalize_form(f);
      if (!form.empty()) add_surface(form, c);
    }
  }
  for (auto& [first, runs] : by_first_token_) {
    std::stable_sort(runs.begin(), runs.end(), [](const TokenRun& a, const TokenRun& b) {
      return a.first.size() > b.first.size();
    });
  }
}

void EntityVocabulary::add_surface(const std::string& form, const std::string& canonical) {
  auto [it, inserted] = surface_.emplace(form, canonical);
  if (!inserted) {
    if (it->second == canonical) return;
    throw Error(ErrorCode::kFormatError, "surface form '" + form + "' maps to both '" +
                                             it->second + "' and '" + canonical + "'");
  }
  auto tokens = token_strings(form);
  by_first_token_[tokens.front()].emplace_back(std::move(tokens), canonical);
}

EntityVocabulary EntityVocabulary::load(const std::filesystem::path& vocab_file,
                                        const std::filesystem::path& synonym_file) {
  const auto terms = read_lines(vocab_file);
  std::map<std::string, std::vector<std::string>> synonyms;
  if (!synonym_file.empty()) {
    for (const auto& line : read_lines(synonym_file)) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw Error(ErrorCode::kFormatError, synonym_file.string() + ": missing TAB in '" + line + "'");
      }
      auto& forms = synonyms[line.substr(0, tab)];
      std::string_view rest = std::string_view(line).substr(tab + 1);
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const auto piece = trim(rest.substr(0, comma));
        if (!piece.empty()) forms.emplace_back(piece);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
    }
  }
  return EntityVocabulary(terms, synonyms);
}

std::string EntityVocabulary::canonicalize(std::string_view term) const {
  const auto it = surface_.find(normalize_form(term));
  return it == surface_.end() ? std::string(term) : it->second;
}

const std::vector<EntityVocabulary::TokenRun>* EntityVocabulary::runs_starting_with(
    std::string_view token) const {
  const auto it = by_first_token_.find(token);
  return it == by_first_token_.end() ? nullptr : &it->second;
}

std::vector<EntityMention> find_mentions(std::string_view caption, const EntityVocabulary& vocab) {
  const auto tokens = tokenize(caption);
  std::vector<EntityMention> mentions;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const auto* runs = vocab.runs_starting_with(tokens[i].text);
    bool matched = false;
    if (runs) {
      for (const auto& [run, canonical] : *runs) {
        if (i + run.size() > tokens.size()) continue;
        bool ok = true;
        for (std::size_t j = 1; j < run.size() && ok; ++j) ok = tokens[i + j].text == run[j];
        if (!ok) continue;
        const std::size_t last = i + run.size();
        mentions.push_back({canonical, i, last, tokens[i].begin, tokens[last - 1].end});
        i = last;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return mentions;
}

EntitySet extract_entities(std::string_view caption, const EntityVocabulary& vocab) {
  EntitySet out;
  for (auto& m : find_mentions(caption, vocab)) out.insert(std::move(m.canonical));
  return out;
}

EntitySet canonicalize_all(const EntitySet& terms, const EntityVocabulary& vocab) {
  EntitySet out;
  for (const auto& t : terms) out.insert(vocab.canonicalize(t));
  return out;
}

std::vector<std::string> classify_image_entities(const Embedding& image,
                                                 const EntityVocabulary& vocab,
                                                 const EmbeddingSource& source,
                                                 std::size_t top_m) {
  check_dim(image, source);
  if (top_m == 0) throw Error(ErrorCode::kInvalidConfig, "top_m must be >= 1");
  const Embedding query = image.normalized();
  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(vocab.size());
  for (const auto& term : vocab.canonical()) {
    ranked.emplace_back(dot(query.values(), embed_entity(source, term).values()), term);
  }
  const std::size_t keep = std::min(top_m, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<std::string> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(std::move(ranked[i].second));
  return out;
}

nlohmann::json to_json(const EntitySets& sets) {
  return {{"key", set_json(sets.key)},
          {"candidates", set_json(sets.candidates)},
          {"filtered", set_json(sets.filtered)},
          {"positive", set_json(sets.positive)},
          {"negative", set_json(sets.negative)}};
}

std::string check_invariants(const EntitySets& s) {
  if (s.filtered != set_difference(s.candidates, s.key)) return "filtered != candidates \\ key";
  if (!includes(s.positive, s.key)) return "positive does not contain key";
  for (const auto& e : s.negative) {
    if (s.positive.count(e)) return "'" + e + "' is both positive and negative";
  }
  for (const auto* part : {&s.candidates, &s.key}) {
    for (const auto& e : *part) {
      if (!s.positive.count(e) && !s.negative.count(e)) return "'" + e + "' is unclassified";
    }
  }
  if (!includes(s.filtered, s.negative)) return "negative is not a subset of filtered";
  return {};
}

EntitySets filter_training(const EntitySet& key, const EntitySet& candidates) {
  EntitySets out;
  out.key = key;
  out.candidates = candidates;
  out.filtered = set_difference(candidates, key);
  out.positive = key;
  out.negative = out.filtered;
  return out;
}

EntitySets filter_inference(const EntitySet& key, const EntitySet& candidates,
                            const Embedding& image, const EmbeddingSource& source,
                            double tau_sim) {
  check_dim(image, source);
  const Embedding query = image.normalized();
  EntitySets out;
  out.key = key;
  out.candidates = candidates;
  out.filtered = set_difference(candidates, key);
  out.positive = key;
  for (const auto& e : out.filtered) {
    const double sim = dot(query.values(), embed_entity(source, e).values());
    if (sim > tau_sim) {
      out.positive.insert(e);
    } else {
      out.negative.insert(e);
    }
  }
  return out;
}

EntitySets pass_through(const EntitySet& key, const EntitySet& candidates) {
  EntitySets out;
  out.key = key;
  out.candidates = candidates;
  out.filtered = set_difference(candidates, key);
  out.positive = key;
  out.positive.insert(out.filtered.begin(), out.filtered.end());
  return out;
}

}  // namespace nes
