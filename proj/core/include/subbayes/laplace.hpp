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

#ifndef SUBBAYES_LAPLACE_HPP_
#define SUBBAYES_LAPLACE_HPP_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "subbayes/datasets.hpp"
#include "subbayes/matrix.hpp"
#include "subbayes/network.hpp"
#include "subbayes/rng.hpp"

namespace subbayes {

enum class LaplaceStructure { Diag, Kron };

std::string_view to_string(LaplaceStructure s);
LaplaceStructure parse_laplace_structure(std::string_view name);

// GGN diagonal of the summed NLL: h_i = Σ_n [Jᵀ(diag p − ppᵀ)J]_ii.
struct CurvatureDiag {
  Vector h;
  std::size_t data_count = 0;
};

// Per adapted layer, with a = x·A (core input) and g = ∂(−log p_c)/∂(a·R):
//   a_cov = mean_n a aᵀ,  g_cov = mean_n Σ_c p_c g_c g_cᵀ.
// The summed-data curvature of vec(R) (row-major) is data_count · (a_cov ⊗ g_cov).
struct KronFactor {
  std::size_t layer = 0;
  Matrix a_cov;
  Matrix g_cov;
};

struct CurvatureKron {
  std::vector<KronFactor> factors;
  std::size_t data_count = 0;
};

using Curvature = std::variant<CurvatureDiag, CurvatureKron>;

CurvatureDiag fit_ggn_diag(const Network& net, const Dataset& data);
CurvatureKron fit_kfac(const Network& net, const Dataset& data);

// Eigenbasis of one Kronecker block; `products[i·r + j]` is
// data_count·λᴬᵢ·λᴳⱼ, clamped at 0.
struct KronEigen {
  Matrix a_vectors;
  Matrix g_vectors;
  Vector products;
};

KronEigen kron_eigen(const KronFactor& f, std::size_t data_count);

// ln det(H + λI) under the stored structure. For KRON, Σᵢⱼ ln(N·λᴬᵢλᴳⱼ + λ).
double log_det_posterior_precision(const Curvature& curv, double prior_precision);

// log Z(λ) = −N·nll − ½λ‖θ‖² + (dim/2)·ln λ − ½·ln det(H + λI).
double log_marginal_likelihood(const Curvature& curv, std::span<const double> theta_map, double data_nll,
                               double prior_precision);

// argmax of log_marginal_likelihood over the grid, ties to the smaller λ.
// Throws ConfigError on an empty grid or a non-positive entry.
double tune_prior_precision(const Curvature& curv, std::span<const double> theta_map, double data_nll,
                            std::span<const double> grid);

// 15 points log-uniform on [1e-3, 1e3].
std::vector<double> default_prior_grid();

class LaplacePosterior {
 public:
  LaplacePosterior(ThetaVector theta_map, Curvature curvature, double prior_precision);

  LaplaceStructure structure() const noexcept;
  const ThetaVector& theta_map() const noexcept { return theta_map_; }
  const Curvature& curvature() const noexcept { return curvature_; }
  double prior_precision() const noexcept { return prior_precision_; }
  const std::vector<KronEigen>& kron_eigen() const noexcept { return eigen_; }
  std::size_t dim() const noexcept { return theta_map_.size(); }

  // Dense Σ = (H + λI)⁻¹ assembled from the structured representation.
  Matrix covariance() const;

 private:
  ThetaVector theta_map_;
  Curvature curvature_;
  double prior_precision_;
  std::vector<KronEigen> eigen_;
};

// DIAG: θ_MAP + z / √(h + λ). KRON: per layer R_MAP + Q_A·E·Q_Gᵀ with
// E_ij ~ N(0, 1 / (N·λᴬᵢλᴳⱼ + λ)), so Cov(vec R) = (N·a_cov ⊗ g_cov + λI)⁻¹.
Vector laplace_sample(const LaplacePosterior& p, SeededRng& rng);

struct LogitGaussian {
  Vector mean;        // logits at θ_MAP
  Matrix covariance;  // J·Σ·Jᵀ, C×C
};

// Linearized predictive at one input; J from the exact layerwise chain rule.
LogitGaussian linearized_logit_cov(const Network& net, const LaplacePosterior& p, std::span<const double> x);

// theta_map.sbmx, meta.json (structure, λ, grid, layout), and h.sbmx or
// per-layer Acov_<layer>.sbmx / Gcov_<layer>.sbmx.
void save_laplace(const std::filesystem::path& dir, const LaplacePosterior& p, std::span<const double> grid);
LaplacePosterior load_laplace(const std::filesystem::path& dir);

}  // namespace subbayes

#endif  // SUBBAYES_LAPLACE_HPP_
