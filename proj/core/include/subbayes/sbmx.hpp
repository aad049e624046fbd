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

#ifndef SUBBAYES_SBMX_HPP_
#define SUBBAYES_SBMX_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "subbayes/matrix.hpp"

namespace subbayes {

// SBMX v1 layout, all little-endian:
//   [0,4)  magic "SBMX"
//   [4,6)  u16 version = 1
//   [6]    u8 dtype = 0 (f64)
//   [7]    reserved = 0
//   [8,16) u64 rows
//   [16,24) u64 cols
//   then rows·cols f64, row-major.
inline constexpr std::uint16_t kSbmxVersion = 1;
inline constexpr std::size_t kSbmxHeaderBytes = 24;

std::vector<std::uint8_t> encode_sbmx(const Matrix& m);
Matrix decode_sbmx(const std::vector<std::uint8_t>& bytes);

void write_sbmx(const std::filesystem::path& path, const Matrix& m);
Matrix read_sbmx(const std::filesystem::path& path);

}  // namespace subbayes

#endif  // SUBBAYES_SBMX_HPP_
