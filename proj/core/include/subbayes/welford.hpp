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

#ifndef SUBBAYES_WELFORD_HPP_
#define SUBBAYES_WELFORD_HPP_

#include <cstddef>
#include <cstdint>

#include "subbayes/matrix.hpp"

namespace subbayes {

// Streaming uncentered second moment E[xᵀx] over row vectors x.
//
// Rows are absorbed one at a time as a running mean of outer products, so
// the result is independent of how the stream is split into batches
// (bit-for-bit). Memory is dim×dim regardless of the number of rows.
class WelfordState {
 public:
  explicit WelfordState(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t count() const noexcept { return count_; }
  const Matrix& moment2() const noexcept { return moment2_; }

  // Absorbs every row of an N×dim batch. Throws ShapeError on dim mismatch.
  void update(const Matrix& batch);
  void update_row(std::span<const double> x);

  // (1/count)·Σ xᵀx; throws NumericalError when no rows were seen.
  Matrix finalize() const;

 private:
  std::size_t dim_;
  std::uint64_t count_ = 0;
  Matrix moment2_;
};

WelfordState welford_update(WelfordState state, const Matrix& batch);

}  // namespace subbayes

#endif  // SUBBAYES_WELFORD_HPP_
