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

// Hand-counted metrics fixture.

#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "nes/metrics.h"

namespace nes::testing {

struct Golden {
  EntityVocabulary vocab;
  std::vector<EvalInstance> instances;
  nlohmann::json expected;
};

inline Golden load_golden(const std::string& path) {
  std::ifstream in(path);
  const auto doc = nlohmann::json::parse(in);
  std::map<std::string, std::vector<std::string>> syn;
  for (const auto& [k, v] : doc.at("synonyms").items()) syn[k] = v.get<std::vector<std::string>>();
  Golden g{EntityVocabulary(doc.at("vocab").get<std::vector<std::string>>(), syn), {},
           doc.at("expected")};
  for (const auto& obj : doc.at("instances")) g.instances.push_back(parse_chair_instance(obj, &g.vocab));
  return g;
}

}  // namespace nes::testing
