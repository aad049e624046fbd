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

#ifndef SUBBAYES_PREDICTIVE_HPP_
#define SUBBAYES_PREDICTIVE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "subbayes/laplace.hpp"
#include "subbayes/matrix.hpp"
#include "subbayes/network.hpp"
#include "subbayes/swag.hpp"

namespace subbayes {

// Point estimate at the network's current cores; sampling it is a no-op.
struct MapPoint {};

using Posterior = std::variant<MapPoint, SwagPosterior, LaplacePosterior>;

struct PredictiveSamples {
  std::vector<Matrix> per_input;  // N entries, each S×C
  Matrix mean;                    // N×C
  std::size_t samples() const noexcept { return per_input.empty() ? 0 : per_input.front().rows(); }
};

// Sample j draws θ with SeededRng(sub_seed(seed, j)). A MapPoint posterior is
// evaluated once regardless of S.
PredictiveSamples bma_predict(const Network& net, const Posterior& posterior, const Matrix& X, std::size_t S,
                              std::uint64_t seed);

struct UncertaintyTriple {
  double total = 0.0;
  double aleatoric = 0.0;
  double epistemic = 0.0;
};

// Shannon entropy in nats, 0·ln 0 = 0.
double entropy(std::span<const double> p);
UncertaintyTriple decompose(const Matrix& samples);
std::vector<UncertaintyTriple> decompose_all(const PredictiveSamples& s);

double ece(const Matrix& mean_probs, std::span<const int> labels, std::size_t bins = 15);
double nll(const Matrix& mean_probs, std::span<const int> labels);
double accuracy(const Matrix& mean_probs, std::span<const int> labels);
std::size_t argmax_row(std::span<const double> row);

// Mann–Whitney AUROC with OOD as the positive class; ties count ½.
double auroc(std::span<const double> scores_ood, std::span<const double> scores_id);
// W₁ between two empirical distributions.
double wasserstein1(std::span<const double> a, std::span<const double> b);

struct Metrics {
  double accuracy = 0.0;
  double ece = 0.0;
  double nll = 0.0;
  double mean_total_entropy = 0.0;
  double mean_aleatoric = 0.0;
  double mean_epistemic = 0.0;
  double auroc = 0.0;
  double w1 = 0.0;
};

Metrics compute_metrics(const PredictiveSamples& s, std::span<const int> labels, std::size_t bins = 15);

// Fixed key order, %.17g-style round-trip formatting.
std::string metrics_to_json(const Metrics& m);

// One row per input: index,total,aleatoric,epistemic.
std::string entropy_csv(std::span<const UncertaintyTriple> triples);

}  // namespace subbayes

#endif  // SUBBAYES_PREDICTIVE_HPP_
