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

#include <benchmark/benchmark.h>

#include "subbayes/linalg.hpp"
#include "subbayes/projections.hpp"
#include "subbayes/rng.hpp"

namespace subbayes {
namespace {

void BM_Svd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SeededRng rng(1);
  const Matrix m = standard_normal(rng, n, n);
  for (auto _ : state) benchmark::DoNotOptimize(svd(m));
}
BENCHMARK(BM_Svd)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

void BM_QrThin(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SeededRng rng(2);
  const Matrix m = standard_normal(rng, n, n / 4 + 1);
  for (auto _ : state) benchmark::DoNotOptimize(qr_thin(m));
}
BENCHMARK(BM_QrThin)->Arg(16)->Arg(64)->Arg(256);

void BM_EigSym(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SeededRng rng(3);
  const Matrix g = standard_normal(rng, n, n);
  const Matrix m = matmul_tn(g, g);
  for (auto _ : state) benchmark::DoNotOptimize(eig_sym(m));
}
BENCHMARK(BM_EigSym)->Arg(8)->Arg(32)->Arg(64);

void BM_BuildProjection(benchmark::State& state) {
  SeededRng rng(4);
  const Matrix w = standard_normal(rng, 64, 48);
  const Matrix g = standard_normal(rng, 64, 64);
  const Matrix sigma = matmul_tn(g, g);
  const auto kind = static_cast<ProjectionKind>(state.range(0));
  for (auto _ : state) {
    switch (kind) {
      case ProjectionKind::Svd: benchmark::DoNotOptimize(build_svd(w, 8)); break;
      case ProjectionKind::Wsvd: benchmark::DoNotOptimize(build_wsvd(w, sigma, 8, 1e-6)); break;
      case ProjectionKind::Dct: benchmark::DoNotOptimize(build_dct(w, 8, true)); break;
      default: benchmark::DoNotOptimize(build_random(w, 8, 5)); break;
    }
  }
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_BuildProjection)
    ->Arg(static_cast<int>(ProjectionKind::Svd))
    ->Arg(static_cast<int>(ProjectionKind::Wsvd))
    ->Arg(static_cast<int>(ProjectionKind::Dct))
    ->Arg(static_cast<int>(ProjectionKind::Rand));

}  // namespace
}  // namespace subbayes
