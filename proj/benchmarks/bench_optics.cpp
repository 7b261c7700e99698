// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "taxel/dataset.hpp"
#include "taxel/image.hpp"
#include "taxel/optics.hpp"

namespace {

using namespace taxel;

void BM_RenderFrame(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const optics::LightingRig rig;
  const HeightField truth = optics::height_field_sphere(4.0, 0.8, n, n, 0.1);
  const optics::GradientField g = optics::gradients_from_height(truth);
  for (auto _ : state) {
    ImageRGB img = optics::render_frame(g, rig);
    benchmark::DoNotOptimize(img.data.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_RenderFrame)->Arg(64)->Arg(128);

void BM_CalibrateLut(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    optics::CalibrationLut lut = dataset::build_calibration_lut(n, 0.1, 16);
    benchmark::DoNotOptimize(lut.gx.data());
  }
}
BENCHMARK(BM_CalibrateLut)->Arg(64);

void BM_FrameToDepth(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const double pitch = 0.1;
  const optics::LightingRig rig;
  const optics::CalibrationLut lut = dataset::build_calibration_lut(n, pitch, 16);
  const ImageRGB flat = quantize_roundtrip(
      optics::render_frame(optics::GradientField::zeros(n, n, pitch), rig));
  const HeightField truth = optics::height_field_sphere(4.0, 0.8, n, n, pitch);
  const ImageRGB press = quantize_roundtrip(
      optics::render_frame(optics::gradients_from_height(truth), rig));
  for (auto _ : state) {
    const optics::GradientField g = optics::gradients_from_frame(press, flat, lut, pitch);
    HeightField depth = optics::rezero_to_border(optics::poisson_reconstruct(g));
    benchmark::DoNotOptimize(depth.data.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_FrameToDepth)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
