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

#ifndef SUBBAYES_RNG_HPP_
#define SUBBAYES_RNG_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "subbayes/matrix.hpp"

namespace subbayes {

// xoshiro256** seeded through SplitMix64.
//
// Every derived quantity (uniforms, indices, normals) is built from the raw
// 64-bit stream with integer arithmetic or correctly rounded IEEE
// operations, except normal() which also calls std::log.
//
// Constants: SplitMix64 increment 0x9E3779B97F4A7C15, mixers
// 0xBF58476D1CE4E5B9 / 0x94D049BB133111EB; xoshiro256** output
// rotl(s1 * 5, 7) * 9, state shift 17, rotation 45.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::size_t uniform_index(std::size_t n);
  // Standard normal via the Marsaglia polar method (pairs are cached).
  double normal();

  // Fisher-Yates using uniform_index; portable unlike std::shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  std::optional<double> spare_;
};

// Seed of the j-th independent sub-stream of `seed`.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t j) noexcept;

Matrix standard_normal(SeededRng& rng, std::size_t rows, std::size_t cols);
Vector standard_normal_vector(SeededRng& rng, std::size_t n);

}  // namespace subbayes

#endif  // SUBBAYES_RNG_HPP_
