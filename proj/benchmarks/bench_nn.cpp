// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "taxel/common.hpp"
#include "taxel/nn.hpp"
#include "taxel/twostream.hpp"

namespace {

using namespace taxel;

nn::Tensor random_tensor(std::vector<int> shape, Rng& rng) {
  nn::Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  nn::ParamStore store;
  nn::Network net(store);
  net.add<nn::Conv2d>(store, "c", 3, 8, 3);
  Rng rng(1);
  net.init(rng);
  const nn::Tensor x = random_tensor({4, 3, n, n}, rng);
  for (auto _ : state) {
    nn::Tensor y = net.predict(x);
    benchmark::DoNotOptimize(y.data.data());
  }
  state.SetItemsProcessed(state.iterations() * 4 * n * n);
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64);

void BM_FusedForwardBackward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  twostream::ModelConfig mc;
  mc.image_size = 64;
  mc.force_len = 64;
  mc.num_classes = 32;
  twostream::Model model(mc);
  Rng rng(2);
  model.init(rng);
  const nn::Tensor depth = random_tensor({batch, 3, 64, 64}, rng);
  const nn::Tensor force = random_tensor({batch, 1, 64}, rng);
  std::vector<int> labels(static_cast<std::size_t>(batch));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i) % 32;
  for (auto _ : state) {
    twostream::Model::Pass pass;
    const nn::Tensor logits = model.forward(depth, force, pass);
    const nn::LossGrad lg = nn::softmax_cross_entropy(logits, labels);
    model.store().zero_grads();
    model.backward(lg.grad, pass);
    benchmark::DoNotOptimize(model.store().flat_grads().data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_FusedForwardBackward)->Arg(4)->Arg(16);

void BM_AdamStep(benchmark::State& state) {
  twostream::ModelConfig mc;
  twostream::Model model(mc);
  Rng rng(3);
  model.init(rng);
  nn::Adam opt(model.store().total_size(), 1e-3);
  std::span<double> grads = model.store().flat_grads();
  for (std::size_t i = 0; i < grads.size(); ++i)
    grads[i] = rng.uniform(-1e-3, 1e-3);
  for (auto _ : state) {
    opt.step(model.store().flat_values(), model.store().flat_grads());
    benchmark::DoNotOptimize(model.store().flat_values().data());
  }
  state.SetItemsProcessed(state.iterations() * model.store().total_size());
}
BENCHMARK(BM_AdamStep);

}  // namespace

BENCHMARK_MAIN();
