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

#include <vector>

#include "subbayes/laplace.hpp"
#include "subbayes/predictive.hpp"
#include "subbayes/projections.hpp"
#include "subbayes/swag.hpp"

namespace subbayes {
namespace {

struct Fixture {
  Network net;
  Dataset data;
};

Fixture make_fixture(std::size_t rank, std::size_t n) {
  SeededRng rng(11);
  const std::size_t hidden[] = {32, 32};
  const Network base = make_mlp(8, hidden, 3, ActivationKind::Relu, rng);
  std::vector<ProjectionPair> pairs;
  for (std::size_t idx : adaptable_layer_indices(base)) pairs.push_back(build_svd(std::get<PlainLinear>(base.layers[idx]).W, rank));
  Fixture f{adapt_network(base, pairs, 16.0, false), {}};
  for (auto& l : f.net.layers)
    if (auto* a = std::get_if<AdaptedLinear>(&l)) a->R = standard_normal(rng, rank, rank) * 0.1;
  f.data.X = standard_normal(rng, n, 8);
  f.data.classes = 3;
  for (std::size_t i = 0; i < n; ++i) f.data.y.push_back(static_cast<int>(i % 3));
  return f;
}

void BM_FitKfac(benchmark::State& state) {
  const Fixture f = make_fixture(static_cast<std::size_t>(state.range(0)), 512);
  for (auto _ : state) benchmark::DoNotOptimize(fit_kfac(f.net, f.data));
}
BENCHMARK(BM_FitKfac)->Arg(2)->Arg(4)->Arg(8);

void BM_FitGgnDiag(benchmark::State& state) {
  const Fixture f = make_fixture(static_cast<std::size_t>(state.range(0)), 512);
  for (auto _ : state) benchmark::DoNotOptimize(fit_ggn_diag(f.net, f.data));
}
BENCHMARK(BM_FitGgnDiag)->Arg(2)->Arg(4)->Arg(8);

void BM_SwagCollect(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  SeededRng rng(12);
  const Matrix theta = standard_normal(rng, 1, dim);
  SwagCollector c(dim, 10);
  for (auto _ : state) c.collect(theta.row_span(0));
}
BENCHMARK(BM_SwagCollect)->Arg(16)->Arg(128)->Arg(1024);

void BM_BmaPredictSwag(benchmark::State& state) {
  const Fixture f = make_fixture(4, 256);
  SwagCollector c(flatten(f.net).size(), 10);
  SeededRng rng(13);
  for (int i = 0; i < 12; ++i) {
    Vector th = flatten(f.net).values;
    for (double& v : th) v += 0.05 * rng.normal();
    c.collect(th);
  }
  const Posterior post = swag_finalize(c);
  for (auto _ : state) benchmark::DoNotOptimize(bma_predict(f.net, post, f.data.X, static_cast<std::size_t>(state.range(0)), 1));
}
BENCHMARK(BM_BmaPredictSwag)->Arg(1)->Arg(15);

void BM_BmaPredictLaplaceKron(benchmark::State& state) {
  const Fixture f = make_fixture(4, 256);
  const Posterior post = LaplacePosterior(flatten(f.net), fit_kfac(f.net, f.data), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(bma_predict(f.net, post, f.data.X, static_cast<std::size_t>(state.range(0)), 1));
}
BENCHMARK(BM_BmaPredictLaplaceKron)->Arg(1)->Arg(15);

}  // namespace
}  // namespace subbayes
