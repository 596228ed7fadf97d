// Copyright 2026 The AdaSample Lab Authors.
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

// Little-endian primitives shared by the binary file formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "adasample/errors.hpp"

namespace adasample::io {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                  static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes.data(), bytes.size());
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

/// Sequential reader that tracks its byte offset for error reporting.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const { return offset_; }

  void expect_magic(const char (&magic)[5]) {
    std::array<char, 4> got{};
    read_exact(got.data(), 4, "magic");
    if (std::memcmp(got.data(), magic, 4) != 0) {
      throw FormatError("bad magic: expected \"" + std::string(magic, 4) + "\", found \"" +
                            printable(got) + "\"",
                        0);
    }
  }

  std::uint32_t u32(const char* what) {
    std::array<unsigned char, 4> b{};
    read_exact(reinterpret_cast<char*>(b.data()), 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  std::uint64_t u64(const char* what) {
    std::array<unsigned char, 8> b{};
    read_exact(reinterpret_cast<char*>(b.data()), 8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  /// Fails if anything follows the parsed content.
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw FormatError("trailing bytes after end of content", offset_);
    }
  }

 private:
  void read_exact(char* dst, std::streamsize n, const char* what) {
    in_.read(dst, n);
    if (in_.gcount() != n) {
      throw FormatError(std::string("truncated file while reading ") + what, offset_ + static_cast<std::uint64_t>(in_.gcount()));
    }
    offset_ += static_cast<std::uint64_t>(n);
  }

  static std::string printable(const std::array<char, 4>& b) {
    std::string s;
    for (char c : b) s += (c >= 32 && c < 127) ? c : '?';
    return s;
  }

  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace adasample::io
