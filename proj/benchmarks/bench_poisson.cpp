// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "taxel/image.hpp"
#include "taxel/optics.hpp"

namespace {

using namespace taxel;

void BM_PoissonReconstruct(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const HeightField truth = optics::height_field_sphere(4.0, 0.8, n, n, 0.1);
  const optics::GradientField g = optics::gradients_from_height(truth);
  for (auto _ : state) {
    HeightField out = optics::poisson_reconstruct(g);
    benchmark::DoNotOptimize(out.data.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_PoissonReconstruct)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_GradientsFromHeight(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const HeightField truth = optics::height_field_sphere(4.0, 0.8, n, n, 0.1);
  for (auto _ : state) {
    optics::GradientField g = optics::gradients_from_height(truth);
    benchmark::DoNotOptimize(g.gx.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_GradientsFromHeight)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
