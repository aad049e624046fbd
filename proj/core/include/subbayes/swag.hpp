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

#ifndef SUBBAYES_SWAG_HPP_
#define SUBBAYES_SWAG_HPP_

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <span>

#include "subbayes/matrix.hpp"
#include "subbayes/rng.hpp"

namespace subbayes {

inline constexpr double kSwagVarianceFloor = 1e-12;

// Gaussian N(μ, ½(D·Dᵀ + diag σ²)) over θ.
struct SwagPosterior {
  Vector mean;
  Vector sigma2;  // >= kSwagVarianceFloor
  Matrix D;       // dim × K deviation columns, oldest first

  std::size_t dim() const noexcept { return mean.size(); }
  // Dense ½(D·Dᵀ + diag σ²); intended for small dims and tests.
  Matrix covariance() const;
};

// Running first/second moments and a ring buffer of the last k deviations.
class SwagCollector {
 public:
  SwagCollector(std::size_t dim, std::size_t k);

  // n ← n+1; μ̂ += (θ−μ̂)/n; m̂₂ += (θ²−m̂₂)/n; push θ − μ̂ (updated μ̂).
  void collect(std::span<const double> theta);

  std::size_t dim() const noexcept { return mean_.size(); }
  std::size_t k() const noexcept { return k_; }
  std::size_t collected() const noexcept { return n_; }
  const Vector& mean() const noexcept { return mean_; }
  const Vector& second_moment() const noexcept { return sq_mean_; }
  // Deviation columns currently held, oldest first.
  const std::deque<Vector>& deviations() const noexcept { return deviations_; }

 private:
  std::size_t k_;
  std::size_t n_ = 0;
  Vector mean_;
  Vector sq_mean_;
  std::deque<Vector> deviations_;
};

SwagCollector swag_collect(SwagCollector c, std::span<const double> theta);

// Throws NumericalError when fewer than two snapshots were collected.
SwagPosterior swag_finalize(const SwagCollector& c);

// θ = μ + (1/√2)·√σ² ⊙ z₁ + (1/√2)·D·z₂.
Vector swag_sample(const SwagPosterior& p, SeededRng& rng);

struct SwagMeta {
  std::size_t k = 0;
  std::size_t burn_in_epoch = 0;
  std::size_t collected = 0;
};

// mu.sbmx (dim×1), sigma2.sbmx (dim×1), D.sbmx (dim×K), meta.json.
void save_swag(const std::filesystem::path& dir, const SwagPosterior& p, const SwagMeta& meta);
SwagPosterior load_swag(const std::filesystem::path& dir, SwagMeta* meta = nullptr);

}  // namespace subbayes

#endif  // SUBBAYES_SWAG_HPP_
