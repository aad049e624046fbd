// Copyright 2026 The subbayes Authors.
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

#include "subbayes/sbmx.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "subbayes/error.hpp"

namespace subbayes {

namespace {

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t off, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[off + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_sbmx(const Matrix& m) {
  std::vector<std::uint8_t> out;
  out.reserve(kSbmxHeaderBytes + 8 * m.size());
  for (char c : {'S', 'B', 'M', 'X'}) out.push_back(static_cast<std::uint8_t>(c));
  put_le(out, kSbmxVersion, 2);
  out.push_back(0);  // dtype f64
  out.push_back(0);  // reserved
  put_le(out, m.rows(), 8);
  put_le(out, m.cols(), 8);
  for (double v : m.data()) put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

Matrix decode_sbmx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kSbmxHeaderBytes) throw FormatError("sbmx: truncated header");
  if (bytes[0] != 'S' || bytes[1] != 'B' || bytes[2] != 'M' || bytes[3] != 'X') {
    throw FormatError("sbmx: bad magic");
  }
  const auto version = get_le(bytes, 4, 2);
  if (version != kSbmxVersion) throw FormatError("sbmx: unsupported version " + std::to_string(version));
  if (bytes[6] != 0) throw FormatError("sbmx: unsupported dtype " + std::to_string(bytes[6]));
  const std::uint64_t rows = get_le(bytes, 8, 8);
  const std::uint64_t cols = get_le(bytes, 16, 8);
  if (cols != 0 && rows > (bytes.size() / 8) / cols) throw FormatError("sbmx: implausible shape");
  const std::uint64_t count = rows * cols;
  if (bytes.size() != kSbmxHeaderBytes + 8 * count) {
    throw FormatError("sbmx: payload length does not match " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
  std::vector<double> data(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<double>(get_le(bytes, kSbmxHeaderBytes + 8 * i, 8));
  }
  return Matrix(rows, cols, std::move(data));
}

void write_sbmx(const std::filesystem::path& path, const Matrix& m) {
  const auto bytes = encode_sbmx(m);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("sbmx: cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("sbmx: write failed: " + path.string());
}

Matrix read_sbmx(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("sbmx: cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_sbmx(bytes);
  } catch (const FormatError& e) {
    throw FormatError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

}  // namespace subbayes
