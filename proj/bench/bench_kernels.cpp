/* Copyright 2026 The GatedAttention Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gatedattn/kernels.hpp"

namespace {

namespace k = gatedattn::kernels;

std::vector<double> random_matrix(std::size_t n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(gen);
  return v;
}

// Shapes follow the recurrent step: batch x hidden times hidden x 4*hidden.
template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const std::size_t m = 4 * d;
  const auto a = random_matrix(n * d, 1);
  const auto b = random_matrix(d * m, 2);
  std::vector<double> c(n * m);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::gemm(a, b, c, n, d, m);
    } else {
      k::reference::gemm(a, b, c, n, d, m);
    }
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * d * m));
}

void shapes(benchmark::internal::Benchmark* b) {
  for (auto n : {32, 256, 1280}) {
    for (auto d : {32, 100}) b->Args({n, d});
  }
}

BENCHMARK(BM_Gemm<false>)->Name("gemm/reference")->Apply(shapes);
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Apply(shapes);

}  // namespace

BENCHMARK_MAIN();
