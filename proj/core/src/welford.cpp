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

#include "subbayes/welford.hpp"

#include "subbayes/error.hpp"

namespace subbayes {

WelfordState::WelfordState(std::size_t dim) : dim_(dim), moment2_(dim, dim) {
  if (dim == 0) throw ShapeError("WelfordState: dim must be positive");
}

void WelfordState::update_row(std::span<const double> x) {
  if (x.size() != dim_) throw ShapeError("welford_update: row length != dim");
  ++count_;
  const double inv_n = 1.0 / static_cast<double>(count_);
  // Fill the upper triangle and mirror it; keeps moment2 exactly symmetric.
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i; j < dim_; ++j) {
      const double updated = moment2_(i, j) + (x[i] * x[j] - moment2_(i, j)) * inv_n;
      moment2_(i, j) = updated;
      moment2_(j, i) = updated;
    }
  }
}

void WelfordState::update(const Matrix& batch) {
  if (batch.cols() != dim_) throw ShapeError("welford_update: batch dim mismatch");
  for (std::size_t r = 0; r < batch.rows(); ++r) update_row(batch.row_span(r));
}

Matrix WelfordState::finalize() const {
  if (count_ == 0) throw NumericalError("welford finalize: no samples");
  return moment2_;
}

WelfordState welford_update(WelfordState state, const Matrix& batch) {
  if (batch.rows() == 0) throw ShapeError("welford_update: empty batch");
  state.update(batch);
  return state;
}

}  // namespace subbayes
