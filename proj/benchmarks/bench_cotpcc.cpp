// Copyright 2026 The cotpcc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <benchmark/benchmark.h>

#include "cotpcc/bitstream.hpp"
#include "cotpcc/cloud.hpp"
#include "cotpcc/knn.hpp"
#include "cotpcc/metrics.hpp"
#include "cotpcc/model.hpp"
#include "cotpcc/range_coder.hpp"

using namespace cotpcc;

namespace {

Points cloud(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Points p(n, 3);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform(-1.0, 1.0);
  return p;
}

void BM_Chamfer(benchmark::State& state) {
  const Points a = cloud(state.range(0), 1), b = cloud(state.range(0), 2);
  for (auto _ : state) benchmark::DoNotOptimize(chamfer_l2(a, b));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Chamfer)->Arg(1024)->Arg(8192);

void BM_Fps(benchmark::State& state) {
  const Points p = cloud(state.range(0), 3);
  for (auto _ : state) benchmark::DoNotOptimize(fps(p, state.range(0) / 2, 0));
}
BENCHMARK(BM_Fps)->Arg(1024)->Arg(4096);

void BM_KnnGraph(benchmark::State& state) {
  const Points p = cloud(state.range(0), 4);
  for (auto _ : state) benchmark::DoNotOptimize(knn_graph(p, 16));
}
BENCHMARK(BM_KnnGraph)->Arg(1024);

// One learned-sampler stage: trunk plus significance features.
void BM_SamplerStage(benchmark::State& state) {
  nn::ParamStore store("sampler");
  Rng rng(5);
  NetConfig config;
  const Sampler sampler(store, config, rng);
  const Points p = cloud(state.range(0), 6);
  const auto table = knn_graph(p, config.knn);
  for (auto _ : state) {
    ad::NoGradGuard guard;
    const Var h = sampler.trunk(p, table);
    benchmark::DoNotOptimize(sampler.significance(h.value(), table));
  }
}
BENCHMARK(BM_SamplerStage)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_RangeEncode(benchmark::State& state) {
  Rng rng(7);
  const std::uint32_t cdf[] = {0, 30000, 50000, 60000, 65536};
  std::vector<int> symbols(static_cast<std::size_t>(state.range(0)));
  for (auto& s : symbols) s = static_cast<int>(rng.below(4));
  for (auto _ : state) {
    RangeEncoder enc;
    for (int s : symbols) enc.encode(cdf[s], cdf[s + 1] - cdf[s]);
    benchmark::DoNotOptimize(enc.finish());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RangeEncode)->Arg(1 << 16);

void BM_CompressBlock(benchmark::State& state) {
  ModelConfig config;
  const Generator gen(config, 1);
  const Points p = cloud(1024, 8);
  for (auto _ : state) benchmark::DoNotOptimize(gen.compress(p, 0));
}
BENCHMARK(BM_CompressBlock)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
