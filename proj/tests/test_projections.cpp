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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "subbayes/error.hpp"
#include "subbayes/linalg.hpp"
#include "subbayes/projections.hpp"
#include "subbayes/rng.hpp"
#include "test_util.hpp"

namespace subbayes {
namespace {

// DCT-II straight from the cosine formula.
Matrix reference_dct(std::size_t d) {
  Matrix m(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    const double alpha = k == 0 ? std::sqrt(1.0 / static_cast<double>(d)) : std::sqrt(2.0 / static_cast<double>(d));
    for (std::size_t i = 0; i < d; ++i) {
      m(k, i) = alpha * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(i) + 1.0) /
                                 (2.0 * static_cast<double>(d)));
    }
  }
  return m;
}

TEST(BuildSvd, DiagonalRankOne) {
  const ProjectionPair p = build_svd(Matrix{{3, 0}, {0, 1}}, 1);
  EXPECT_LE(max_abs_diff(p.product(), Matrix{{3, 0}, {0, 0}}), 1e-14);
  EXPECT_NEAR(recon_error(Matrix{{3, 0}, {0, 1}}, p), 1.0, 1e-14);
  EXPECT_EQ(p.A.rows(), 2u);
  EXPECT_EQ(p.B.cols(), 2u);
}

TEST(BuildSvd, FullRankAndTailOracle) {
  SeededRng rng(42);
  const Matrix w = standard_normal(rng, 6, 5);
  EXPECT_LE(recon_error(w, build_svd(w, 5)), 1e-8);
  const SvdResult s = svd(w);
  const double err = recon_error(w, build_svd(w, 3));
  EXPECT_NEAR(err * err, s.S[3] * s.S[3] + s.S[4] * s.S[4], 1e-8);
}

TEST(BuildSvd, RankOutOfRange) {
  EXPECT_THROW(build_svd(Matrix(3, 2, 1.0), 3), ShapeError);
  EXPECT_THROW(build_svd(Matrix(3, 2, 1.0), 0), ShapeError);
}

TEST(BuildWsvd, IdentityWhitenerMatchesSvd) {
  SeededRng rng(6);
  const Matrix w = standard_normal(rng, 7, 5);
  const ProjectionPair a = build_wsvd(w, Matrix::identity(7), 3, 0.0);
  const ProjectionPair b = build_svd(w, 3);
  EXPECT_LE(frobenius_norm(a.product() - b.product()), 1e-8);
}

TEST(BuildWsvd, DiagonalSecondMomentKeepsHeavyDirection) {
  const Matrix sigma{{100, 0}, {0, 1}};
  const ProjectionPair p = build_wsvd(Matrix::identity(2), sigma, 1, 0.0);
  EXPECT_LE(max_abs_diff(p.product(), Matrix{{1, 0}, {0, 0}}), 1e-12);
  EXPECT_NEAR(activation_error(Matrix::identity(2), p, sigma), 1.0, 1e-12);
}

TEST(BuildWsvd, BeatsSvdOnCorrelatedInputs) {
  SeededRng rng(8);
  const Matrix m = standard_normal(rng, 8, 8);
  const Matrix sigma = matmul_tn(m, m) * 0.125;
  const Matrix w = standard_normal(rng, 8, 6);
  const double ridge = default_whitening_ridge(sigma);
  const double e_w = activation_error(w, build_wsvd(w, sigma, 2, ridge), sigma);
  const double e_s = activation_error(w, build_svd(w, 2), sigma);
  EXPECT_LE(e_w, e_s + 1e-10);
}

TEST(Dct, OrthogonalAndMatchesFormula) {
  for (std::size_t d = 1; d <= 16; ++d) {
    const Matrix dm = dct_matrix(d);
    EXPECT_LE(max_abs_diff(dm, reference_dct(d)), 1e-14);
    EXPECT_LE(max_abs_diff(matmul_nt(dm, dm), Matrix::identity(d)), 1e-10);
  }
}

TEST(BuildDct, ConstantMatrixIsOneCoefficient) {
  const Matrix w(4, 4, 2.5);
  const ProjectionPair p = build_dct(w, 1, false);
  EXPECT_LE(max_abs_diff(p.product(), w), 1e-12);
  const Matrix c = matmul_nt(matmul(reference_dct(4), w), reference_dct(4));
  EXPECT_NEAR(c(0, 0), 10.0, 1e-12);
  EXPECT_NEAR(frobenius_norm_sq(c), 100.0, 1e-10);
}

TEST(BuildDct, SortedInputIgnoresPermuteFlag) {
  Matrix w(5, 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) w(i, j) = (5.0 - static_cast<double>(i)) * (4.0 - static_cast<double>(j)) + 0.1;
  const ProjectionPair on = build_dct(w, 2, true);
  const ProjectionPair off = build_dct(w, 2, false);
  EXPECT_EQ(on.A, off.A);
  EXPECT_EQ(on.B, off.B);
}

TEST(BuildDct, MaskedCoefficientOracle) {
  SeededRng rng(5);
  const Matrix w = standard_normal(rng, 8, 8);
  const ProjectionPair p = build_dct(w, 3, false);
  const Matrix c = matmul_nt(matmul(reference_dct(8), w), reference_dct(8));
  // Top-3 row and column energies, lower index first on ties.
  auto top = [&](bool rows) {
    std::vector<double> e(8, 0.0);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j) e[rows ? i : j] += c(i, j) * c(i, j);
    std::vector<std::size_t> idx(8);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return e[a] > e[b]; });
    idx.resize(3);
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  EXPECT_EQ(p.meta.dct_rows, top(true));
  EXPECT_EQ(p.meta.dct_cols, top(false));
  double kept = 0.0;
  for (std::size_t i : p.meta.dct_rows)
    for (std::size_t j : p.meta.dct_cols) kept += c(i, j) * c(i, j);
  const double err = recon_error(w, p);
  EXPECT_NEAR(err * err, frobenius_norm_sq(c) - kept, 1e-8);
  EXPECT_NEAR(frobenius_norm(c), frobenius_norm(w), 1e-8);
}

TEST(BuildDct, PermutationHelpsScrambledMonotoneStructure) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SeededRng rng(seed);
    const std::size_t n = 12, m = 10;
    Matrix smooth(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        smooth(i, j) = std::exp(-0.3 * static_cast<double>(i)) * std::exp(-0.25 * static_cast<double>(j)) *
                       (1.0 + 0.05 * rng.normal());
    std::vector<std::size_t> rp(n), cp(m);
    std::iota(rp.begin(), rp.end(), 0);
    std::iota(cp.begin(), cp.end(), 0);
    rng.shuffle(rp);
    rng.shuffle(cp);
    const Matrix scrambled = smooth.select_rows(rp).select_cols(cp);
    const double on = recon_error(scrambled, build_dct(scrambled, 2, true));
    const double off = recon_error(scrambled, build_dct(scrambled, 2, false));
    wins += on <= off ? 1 : 0;
  }
  EXPECT_GE(wins, 18);
}

TEST(Permute, PreservesFrobeniusNorm) {
  SeededRng rng(2);
  const Matrix w = standard_normal(rng, 6, 4);
  const auto rows = l1_descending_row_order(w);
  const auto cols = l1_descending_col_order(w);
  EXPECT_DOUBLE_EQ(frobenius_norm(permute(w, rows, cols)), frobenius_norm(w));
}

TEST(Haar, OrthonormalAndDeterministic) {
  SeededRng a(3), b(3);
  const Matrix l = haar_frame(a, 10, 4);
  EXPECT_LE(max_abs_diff(matmul_tn(l, l), Matrix::identity(4)), 1e-10);
  EXPECT_EQ(l, haar_frame(b, 10, 4));
}

TEST(BuildRandom, DeterministicFullRankAndContracting) {
  SeededRng rng(11);
  const Matrix w = standard_normal(rng, 10, 8);
  const ProjectionPair p = build_random(w, 4, 11);
  const ProjectionPair q = build_random(w, 4, 11);
  EXPECT_EQ(p.A, q.A);
  EXPECT_EQ(p.B, q.B);
  EXPECT_LE(frobenius_norm(p.product()), frobenius_norm(w) + 1e-10);
  EXPECT_LE(max_abs_diff(matmul_nt(p.B, p.B), Matrix::identity(4)), 1e-10);

  const Matrix sq = standard_normal(rng, 6, 6);
  EXPECT_LE(recon_error(sq, build_random(sq, 6, 1)), 1e-8);
}

TEST(BuildHybrid, DuplicateSvdHalvesShareTheSvdSpan) {
  SeededRng rng(4);
  const Matrix w = standard_normal(rng, 8, 8);
  const ProjectionPair h = build_hybrid(w, 4, ProjectionKind::Svd, ProjectionKind::Svd, {});
  const ProjectionPair half = build_svd(w, 2);
  // Concatenated halves repeat the same basis, so AB = 2 × the rank-2 approximation.
  EXPECT_LE(frobenius_norm(h.product() * 0.5 - half.product()), 1e-10);
  EXPECT_EQ(h.A.cols(), 4u);
  EXPECT_EQ(h.B.rows(), 4u);
}

TEST(BuildHybrid, DctSvdBoundedByEckartYoung) {
  SeededRng rng(9);
  const Matrix w = standard_normal(rng, 8, 8);
  const ProjectionPair h = build_hybrid(w, 4, ProjectionKind::Dct, ProjectionKind::Svd, {});
  EXPECT_GE(recon_error(w, h), recon_error(w, build_svd(w, 4)) - 1e-10);
}

TEST(BuildHybrid, RandSvdDeterministicAndOddRankRejected) {
  SeededRng rng(1);
  const Matrix w = standard_normal(rng, 6, 6);
  HybridOptions opts;
  opts.seed = 5;
  const ProjectionPair a = build_hybrid(w, 4, ProjectionKind::Rand, ProjectionKind::Svd, opts);
  const ProjectionPair b = build_hybrid(w, 4, ProjectionKind::Rand, ProjectionKind::Svd, opts);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.B, b.B);
  EXPECT_THROW(build_hybrid(w, 3, ProjectionKind::Rand, ProjectionKind::Svd, opts), ConfigError);
}

TEST(Errors, ExactPairAndIdentityWeighting) {
  SeededRng rng(12);
  const Matrix w = standard_normal(rng, 5, 4);
  const ProjectionPair full = build_svd(w, 4);
  EXPECT_LE(recon_error(w, full), 1e-10);
  EXPECT_LE(activation_error(w, full, Matrix::identity(5)), 1e-18);
  const ProjectionPair p = build_svd(w, 2);
  const double r = recon_error(w, p);
  EXPECT_NEAR(activation_error(w, p, Matrix::identity(5)), r * r, 1e-12);
  EXPECT_THROW(activation_error(w, p, Matrix::identity(4)), ShapeError);
}

TEST(Errors, ActivationErrorMonteCarlo) {
  SeededRng rng(13);
  const std::size_t n = 4;
  const Matrix w = standard_normal(rng, n, 3);
  const Matrix mix = standard_normal(rng, n, n);
  const Matrix sigma = matmul_tn(mix, mix);
  const ProjectionPair p = build_svd(w, 1);
  const Matrix diff = w - p.product();
  const std::size_t samples = 100000;
  double mean = 0.0, sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const Matrix x = matmul(standard_normal(rng, 1, n), mix);  // E[xᵀx] = mixᵀ·mix
    const double v = frobenius_norm_sq(matmul(x, diff));
    mean += v;
    sq += v * v;
  }
  mean /= samples;
  const double se = std::sqrt((sq / samples - mean * mean) / samples);
  EXPECT_NEAR(activation_error(w, p, sigma), mean, 3.0 * se);
}

// Property: SVD has the smallest recon error and WSVD the smallest
// activation error among all builders.
TEST(Builders, OptimalityProperty) {
  SeededRng rng(21);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t n = 4 + rng.uniform_index(6), m = 4 + rng.uniform_index(6);
    const Matrix w = standard_normal(rng, n, m);
    const Matrix sigma = testing::random_spd(rng, n, 200.0);
    const double ridge = default_whitening_ridge(sigma);
    for (std::size_t r = 2; r <= std::min(n, m); r += 2) {
      const ProjectionPair pairs[] = {
          build_svd(w, r),
          build_wsvd(w, sigma, r, ridge),
          build_dct(w, r, true),
          build_random(w, r, static_cast<std::uint64_t>(trial)),
          build_hybrid(w, r, ProjectionKind::Dct, ProjectionKind::Svd, {}),
      };
      const double svd_err = recon_error(w, pairs[0]);
      const double wsvd_act = activation_error(w, pairs[1], sigma);
      for (const auto& p : pairs) {
        EXPECT_GE(recon_error(w, p), svd_err - 1e-10);
        EXPECT_GE(activation_error(w, p, sigma), wsvd_act - 1e-10 * std::max(1.0, wsvd_act));
      }
    }
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t r = 1; r <= std::min(n, m); ++r) {
      const double e = recon_error(w, build_svd(w, r));
      EXPECT_LE(e, prev + 1e-12);
      prev = e;
    }
  }
}

TEST(Persistence, RoundTrip) {
  SeededRng rng(14);
  const Matrix w = standard_normal(rng, 6, 5);
  const auto dir = testing::temp_dir("projection");
  for (const ProjectionPair& p : {build_dct(w, 2, true), build_random(w, 3, 7), build_svd(w, 2),
                                   build_hybrid(w, 2, ProjectionKind::Dct, ProjectionKind::Rand, {})}) {
    save_projection(dir, p);
    const ProjectionPair q = load_projection(dir);
    EXPECT_EQ(q.A, p.A);
    EXPECT_EQ(q.B, p.B);
    EXPECT_EQ(q.kind, p.kind);
    EXPECT_EQ(q.rank, p.rank);
    EXPECT_EQ(q.meta.dct_rows, p.meta.dct_rows);
    EXPECT_EQ(q.meta.row_perm, p.meta.row_perm);
    EXPECT_EQ(q.meta.seed, p.meta.seed);
  }
}

TEST(ProjectionKind, ParseNames) {
  EXPECT_EQ(parse_projection_kind("svd"), ProjectionKind::Svd);
  EXPECT_EQ(parse_projection_kind("wsvd"), ProjectionKind::Wsvd);
  EXPECT_EQ(parse_projection_kind("dct"), ProjectionKind::Dct);
  EXPECT_EQ(parse_projection_kind("rand"), ProjectionKind::Rand);
  EXPECT_EQ(parse_projection_kind("hybrid"), ProjectionKind::Hybrid);
  EXPECT_THROW(parse_projection_kind("pca"), ConfigError);
}

}  // namespace
}  // namespace subbayes
