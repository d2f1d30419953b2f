// Copyright 2026 The mvusim Authors
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

// Serial reference MVP kernel against the OpenMP kernel.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mvusim/mvp_kernels.hpp"

using namespace mvusim;

namespace {

struct Fixture {
  MvpPlan plan;
  std::vector<std::uint64_t> act_ram;
  std::vector<std::uint64_t> weight_ram;
};

// A 3x3x64 conv row: `tiles` output pixels, reduction over 9 taps.
Fixture make_fixture(int bits, std::size_t tiles) {
  Fixture f;
  f.plan.act = Precision::make(bits, false);
  f.plan.weight = Precision::make(bits, true);
  f.plan.reduce_length = 9;
  const std::size_t b = static_cast<std::size_t>(bits);
  const std::size_t act_words = (tiles + 2) * 3 * b;
  std::mt19937_64 rng(1);
  f.act_ram.resize(act_words);
  for (auto& w : f.act_ram) w = rng();
  f.weight_ram.resize(9 * b * kWordsPerWeightRow);
  for (auto& w : f.weight_ram) w = rng();
  for (std::size_t t = 0; t < tiles; ++t) {
    for (std::size_t r = 0; r < 9; ++r) {
      f.plan.act_addr.push_back(static_cast<std::uint32_t>(((t + r % 3) * 3 + r / 3) * b));
      f.plan.weight_addr.push_back(static_cast<std::uint32_t>(r * b));
    }
  }
  return f;
}

template <KernelKind kind>
void bm_mvp(benchmark::State& state) {
  const Fixture f = make_fixture(static_cast<int>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    auto out = mvp_tiles(kind, f.plan, f.act_ram, f.weight_ram);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

}  // namespace

BENCHMARK(bm_mvp<KernelKind::Serial>)->Args({2, 32})->Args({4, 32})->Args({8, 32})->Unit(benchmark::kMicrosecond);
BENCHMARK(bm_mvp<KernelKind::Parallel>)->Args({2, 32})->Args({4, 32})->Args({8, 32})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
