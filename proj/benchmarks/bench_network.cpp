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

#include "subbayes/network.hpp"
#include "subbayes/projections.hpp"
#include "subbayes/rng.hpp"

namespace subbayes {
namespace {

Network bench_net(std::size_t width, std::size_t rank) {
  SeededRng rng(7);
  const std::size_t hidden[] = {width, width};
  const Network base = make_mlp(16, hidden, 4, ActivationKind::Tanh, rng);
  std::vector<ProjectionPair> pairs;
  for (std::size_t idx : adaptable_layer_indices(base)) pairs.push_back(build_svd(std::get<PlainLinear>(base.layers[idx]).W, rank));
  return adapt_network(base, pairs, 16.0, false);
}

void BM_Forward(benchmark::State& state) {
  const Network net = bench_net(static_cast<std::size_t>(state.range(0)), 4);
  SeededRng rng(8);
  const Matrix x = standard_normal(rng, 128, 16);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, x));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64)->Arg(256);

void BM_ForwardBackward(benchmark::State& state) {
  const Network net = bench_net(static_cast<std::size_t>(state.range(0)), 4);
  SeededRng rng(9);
  const Matrix x = standard_normal(rng, 128, 16);
  std::vector<int> y(128);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 4);
  for (auto _ : state) {
    ForwardCache cache;
    forward(net, x, &cache);
    benchmark::DoNotOptimize(backward(net, cache, y));
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_ForwardBackward)->Arg(16)->Arg(64)->Arg(256);

void BM_LogitJacobian(benchmark::State& state) {
  const Network net = bench_net(64, static_cast<std::size_t>(state.range(0)));
  SeededRng rng(10);
  const Matrix x = standard_normal(rng, 1, 16);
  for (auto _ : state) benchmark::DoNotOptimize(logit_jacobian(net, x.row_span(0)));
}
BENCHMARK(BM_LogitJacobian)->Arg(2)->Arg(4)->Arg(8);

}  // namespace
}  // namespace subbayes
