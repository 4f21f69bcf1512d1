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

// Little-endian primitives shared by the .nese and .nesw formats.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "nes/error.h"

namespace nes::io {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  }
  return v;
}

class LittleEndianWriter {
 public:
  explicit LittleEndianWriter(std::ostream& out) : out_(out) {}

  void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }

  template <typename U>
  void uint(U v) {
    const U le = to_little(v);
    out_.write(reinterpret_cast<const char*>(&le), sizeof(U));
  }

  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }

 private:
  std::ostream& out_;
};

class LittleEndianReader {
 public:
  LittleEndianReader(std::istream& in, std::string source)
      : in_(in), source_(std::move(source)) {}

  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) truncated();
    return s;
  }

  template <typename U>
  U uint() {
    U raw = 0;
    in_.read(reinterpret_cast<char*>(&raw), sizeof(U));
    if (in_.gcount() != sizeof(U)) truncated();
    return to_little(raw);
  }

  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  [[noreturn]] void truncated() const {
    throw Error(ErrorCode::kFormatError, source_ + ": unexpected end of file");
  }

 private:
  std::istream& in_;
  std::string source_;
};

}  // namespace nes::io
