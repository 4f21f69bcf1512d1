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
#include <string>
#include <string_view>
#include <vector>

namespace nes {

// A lowercased token and the byte range it came from in the source text.
struct Token {
  std::string text;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Splits on ASCII non-alphanumeric bytes and lowercases ASCII letters. Bytes
// >= 0x80 are kept inside tokens so UTF-8 words survive intact.
std::vector<Token> tokenize(std::string_view text);

std::vector<std::string> token_strings(std::string_view text);

std::string_view trim(std::string_view s);

}  // namespace nes
