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

#ifndef SUBBAYES_PROJECTIONS_HPP_
#define SUBBAYES_PROJECTIONS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subbayes/matrix.hpp"
#include "subbayes/rng.hpp"

namespace subbayes {

enum class ProjectionKind { Svd, Wsvd, Dct, Rand, Hybrid };

std::string_view to_string(ProjectionKind kind);
// Accepts "svd", "wsvd", "dct", "rand", "hybrid" (case-insensitive).
ProjectionKind parse_projection_kind(std::string_view name);

struct ProjectionMeta {
  // DCT: selected row/column frequencies, ascending.
  std::vector<std::size_t> dct_rows;
  std::vector<std::size_t> dct_cols;
  // DCT with permute: row_perm[i] is the source row of sorted row i.
  std::vector<std::size_t> row_perm;
  std::vector<std::size_t> col_perm;
  bool permuted = false;
  std::optional<std::uint64_t> seed;  // RAND, including a retry seed if one was used
  std::optional<double> ridge;        // WSVD
  // HYBRID: component kinds and metadata, in column/row concatenation order.
  std::vector<ProjectionKind> parts;
  std::vector<ProjectionMeta> part_meta;
};

// Frozen projection pair: ΔW = A·R·B with A n×r and B r×m.
struct ProjectionPair {
  Matrix A;
  Matrix B;
  ProjectionKind kind = ProjectionKind::Svd;
  std::size_t rank = 0;
  ProjectionMeta meta;

  Matrix product() const { return matmul(A, B); }
};

struct ProjectionSpec {
  ProjectionKind kind = ProjectionKind::Svd;
  std::size_t rank = 4;
  std::optional<std::string> whitening_source;  // dataset id used for Σ_xx
  std::uint64_t seed = 0;
  bool permute = true;
  std::optional<double> ridge;  // WSVD; defaults to default_whitening_ridge
  ProjectionKind hybrid_first = ProjectionKind::Dct;
  ProjectionKind hybrid_second = ProjectionKind::Svd;
};

// A = U_r·diag(S_r), B = V_rᵀ.
ProjectionPair build_svd(const Matrix& w0, std::size_t rank);

// Whitened SVD under the uncentered second moment sigma_xx of the layer input.
ProjectionPair build_wsvd(const Matrix& w0, const Matrix& sigma_xx, std::size_t rank, double ridge);

// 1e-6 · trace(Σ) / dim.
double default_whitening_ridge(const Matrix& sigma_xx);

// Orthonormal DCT-II matrix, D(k, i) = α_k cos(π k (2i + 1) / 2d).
Matrix dct_matrix(std::size_t d);

// Row (or column) order by descending L1 norm, ties to the lower index.
std::vector<std::size_t> l1_descending_row_order(const Matrix& m);
std::vector<std::size_t> l1_descending_col_order(const Matrix& m);
// W̃(i, j) = W(row_perm[i], col_perm[j]), i.e. P_r·W·P_cᵀ.
Matrix permute(const Matrix& w, std::span<const std::size_t> row_perm,
               std::span<const std::size_t> col_perm);

ProjectionPair build_dct(const Matrix& w0, std::size_t rank, bool permute);

// Haar-distributed orthonormal frame: QR of a Gaussian matrix with the
// columns of Q sign-fixed so that diag(R) >= 0.
Matrix haar_frame(SeededRng& rng, std::size_t n, std::size_t r);

ProjectionPair build_random(const Matrix& w0, std::size_t rank, std::uint64_t seed);

struct HybridOptions {
  const Matrix* sigma_xx = nullptr;  // required when a half is WSVD
  std::optional<double> ridge;
  std::uint64_t seed = 0;
  bool permute = true;
};

// Each kind at rank/2; A = [A₁ | A₂], B = [B₁ ; B₂]. No re-orthogonalization.
ProjectionPair build_hybrid(const Matrix& w0, std::size_t rank, ProjectionKind first,
                            ProjectionKind second, const HybridOptions& opts);

// Dispatches on spec.kind. sigma_xx is required for WSVD (or hybrids with a WSVD half).
ProjectionPair build_projection(const Matrix& w0, const ProjectionSpec& spec,
                                const Matrix* sigma_xx = nullptr);

// ‖W0 − A·B‖_F
double recon_error(const Matrix& w0, const ProjectionPair& pair);
// tr((W0 − A·B)ᵀ·Σ·(W0 − A·B)) = E‖x(W0 − A·B)‖² under second moment Σ.
double activation_error(const Matrix& w0, const ProjectionPair& pair, const Matrix& sigma_xx);

// Directory with A.sbmx, B.sbmx, meta.json.
void save_projection(const std::filesystem::path& dir, const ProjectionPair& pair);
ProjectionPair load_projection(const std::filesystem::path& dir);

}  // namespace subbayes

#endif  // SUBBAYES_PROJECTIONS_HPP_
