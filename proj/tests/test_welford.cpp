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

#include "subbayes/error.hpp"
#include "subbayes/rng.hpp"
#include "subbayes/welford.hpp"

namespace subbayes {
namespace {

TEST(Welford, TwoUnitRowsGiveHalfIdentity) {
  const WelfordState s = welford_update(WelfordState(2), Matrix{{1, 0}, {0, 1}});
  EXPECT_EQ(s.count(), 2u);
  EXPECT_EQ(s.finalize(), (Matrix{{0.5, 0}, {0, 0.5}}));
}

TEST(Welford, SplitBatchesBitIdentical) {
  const WelfordState one = welford_update(WelfordState(2), Matrix{{1, 0}, {0, 1}});
  WelfordState two = welford_update(WelfordState(2), Matrix{{1, 0}});
  two = welford_update(two, Matrix{{0, 1}});
  EXPECT_EQ(one.finalize(), two.finalize());
}

TEST(Welford, MatchesTwoPassOracle) {
  SeededRng rng(9);
  const Matrix x = standard_normal(rng, 1000, 6);
  WelfordState s(6);
  s.update(x);
  const Matrix oracle = matmul_tn(x, x) * (1.0 / 1000.0);
  EXPECT_LE(frobenius_norm(s.finalize() - oracle) / frobenius_norm(oracle), 1e-10);
}

// Property: random batch partitions of the same row stream agree exactly.
TEST(Welford, BatchPartitionInvariance) {
  SeededRng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(200);
    const std::size_t d = 1 + rng.uniform_index(8);
    const Matrix x = standard_normal(rng, n, d);
    WelfordState whole(d);
    whole.update(x);
    WelfordState parts(d);
    std::size_t begin = 0;
    while (begin < n) {
      const std::size_t len = 1 + rng.uniform_index(n - begin);
      parts = welford_update(parts, x.rows_range(begin, len));
      begin += len;
    }
    EXPECT_EQ(whole.count(), parts.count());
    const Matrix a = whole.finalize(), b = parts.finalize();
    EXPECT_LE(frobenius_norm(a - b), 1e-10 * frobenius_norm(a));
    EXPECT_EQ(a, a.transpose());
  }
}

TEST(Welford, Errors) {
  EXPECT_THROW(welford_update(WelfordState(2), Matrix(1, 3)), ShapeError);
  EXPECT_THROW(welford_update(WelfordState(2), Matrix(0, 2)), ShapeError);
  EXPECT_THROW(WelfordState(2).finalize(), NumericalError);
}

}  // namespace
}  // namespace subbayes
