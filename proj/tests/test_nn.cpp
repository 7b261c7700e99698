// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "taxel/checkpoint.hpp"
#include "taxel/common.hpp"
#include "taxel/nn.hpp"

using namespace taxel;
using namespace taxel::nn;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

using LossFn = std::function<LossGrad(const Tensor&)>;

// Central finite differences over every parameter and input element.
void gradcheck(Network& net, ParamStore& store, Tensor x, const LossFn& loss,
               double tol = 1e-5) {
  store.zero_grads();
  Tape tape;
  const Tensor pred = net.forward(x, tape);
  const LossGrad lg = loss(pred);
  const Tensor dx = net.backward(lg.grad, tape);

  const double eps = 1e-5;
  std::span<double> vals = store.flat_values();
  std::span<double> grads = store.flat_grads();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double keep = vals[i];
    vals[i] = keep + eps;
    const double lp = loss(net.predict(x)).loss;
    vals[i] = keep - eps;
    const double lm = loss(net.predict(x)).loss;
    vals[i] = keep;
    const double fd = (lp - lm) / (2.0 * eps);
    if (std::abs(fd) < 1e-10 && std::abs(grads[i]) < 1e-10) continue;
    CHECK(rel_err(fd, grads[i]) < tol);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x.data[i];
    x.data[i] = keep + eps;
    const double lp = loss(net.predict(x)).loss;
    x.data[i] = keep - eps;
    const double lm = loss(net.predict(x)).loss;
    x.data[i] = keep;
    const double fd = (lp - lm) / (2.0 * eps);
    if (std::abs(fd) < 1e-10 && std::abs(dx.data[i]) < 1e-10) continue;
    CHECK(rel_err(fd, dx.data[i]) < tol);
  }
}

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("gradcheck: dense relu dense under mse") {
  ParamStore store;
  Network net(store);
  net.add<Dense>(store, "fc1", 5, 4);
  net.add<Relu>();
  net.add<Dense>(store, "fc2", 4, 2);
  Rng rng(301);
  net.init(rng);
  const Tensor target = random_tensor({3, 2}, rng);
  gradcheck(net, store, random_tensor({3, 5}, rng),
            [&](const Tensor& p) { return mse_loss(p, target); });
}

TEST_CASE("gradcheck: conv2d pool gap dense under cross-entropy") {
  ParamStore store;
  Network net(store);
  net.add<Conv2d>(store, "conv1", 2, 3);
  net.add<Relu>();
  net.add<MaxPool2d>();
  net.add<GlobalAvgPool>();
  net.add<Dense>(store, "fc", 3, 4);
  Rng rng(302);
  net.init(rng);
  const std::vector<int> labels{1, 3};
  gradcheck(net, store, random_tensor({2, 2, 4, 4}, rng),
            [&](const Tensor& p) { return softmax_cross_entropy(p, labels); });
}

TEST_CASE("gradcheck: conv1d pool gap dense under mse") {
  ParamStore store;
  Network net(store);
  net.add<Conv1d>(store, "conv1", 2, 3);
  net.add<Relu>();
  net.add<MaxPool1d>();
  net.add<GlobalAvgPool>();
  net.add<Dense>(store, "fc", 3, 1);
  Rng rng(303);
  net.init(rng);
  const Tensor target = random_tensor({2, 1}, rng);
  gradcheck(net, store, random_tensor({2, 2, 8}, rng),
            [&](const Tensor& p) { return mse_loss(p, target); });
}

TEST_CASE("gradcheck: sigmoid gate") {
  ParamStore store;
  Network net(store);
  net.add<Dense>(store, "fc", 3, 3);
  net.add<Sigmoid>();
  Rng rng(304);
  net.init(rng);
  const Tensor target = random_tensor({4, 3}, rng, 0.0, 1.0);
  gradcheck(net, store, random_tensor({4, 3}, rng),
            [&](const Tensor& p) { return mse_loss(p, target); });
}

TEST_CASE("maxpool2d picks window maxima and routes gradients to them") {
  ParamStore store;
  Network net(store);
  net.add<MaxPool2d>();
  Tensor x({1, 1, 4, 4});
  x.data = {1, 2, 5, 4,
            3, 0, 1, 2,
            7, 8, 0, 1,
            6, 5, 3, 9};
  Tape tape;
  const Tensor y = net.forward(x, tape);
  REQUIRE(y.shape == std::vector<int>{1, 1, 2, 2});
  CHECK(y.data == std::vector<double>{3, 5, 8, 9});

  Tensor dy({1, 1, 2, 2});
  dy.data = {10, 20, 30, 40};
  const Tensor dx = net.backward(dy, tape);
  std::vector<double> expect(16, 0.0);
  expect[4] = 10;   // the 3
  expect[2] = 20;   // the 5
  expect[9] = 30;   // the 8
  expect[15] = 40;  // the 9
  CHECK(dx.data == expect);
}

TEST_CASE("global average pool averages spatial positions") {
  ParamStore store;
  Network net(store);
  net.add<GlobalAvgPool>();
  Tensor x({1, 2, 2, 2});
  x.data = {1, 2, 3, 4, 10, 20, 30, 40};
  Tape tape;
  const Tensor y = net.forward(x, tape);
  REQUIRE(y.shape == std::vector<int>{1, 2});
  CHECK(y.data[0] == doctest::Approx(2.5));
  CHECK(y.data[1] == doctest::Approx(25.0));
}

TEST_CASE("uniform logits cost ln K") {
  Tensor logits({2, 4});
  std::fill(logits.data.begin(), logits.data.end(), 0.7);
  const LossGrad lg = softmax_cross_entropy(logits, {0, 2});
  CHECK(lg.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  for (int s = 0; s < 2; ++s) {
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) sum += lg.grad.data[static_cast<std::size_t>(s) * 4 + j];
    CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("cross-entropy is immune to large logit offsets") {
  Tensor a({1, 3});
  a.data = {1.0, 2.0, 3.0};
  Tensor b = a;
  for (double& v : b.data) v += 1000.0;
  const LossGrad la = softmax_cross_entropy(a, {2});
  const LossGrad lb = softmax_cross_entropy(b, {2});
  CHECK(la.loss == doctest::Approx(lb.loss).epsilon(1e-9));
  CHECK(std::isfinite(lb.loss));
}

TEST_CASE("softmax rows are probability vectors") {
  Rng rng(305);
  const Tensor logits = random_tensor({5, 7}, rng, -30.0, 30.0);
  const Tensor p = softmax(logits);
  for (int s = 0; s < 5; ++s) {
    double sum = 0.0;
    for (int j = 0; j < 7; ++j) {
      const double v = p.data[static_cast<std::size_t>(s) * 7 + j];
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("mse matches the hand-computed value and gradient") {
  Tensor pred({1, 2});
  pred.data = {1.0, 2.0};
  Tensor target({1, 2});
  target.data = {3.0, 5.0};
  const LossGrad lg = mse_loss(pred, target);
  CHECK(lg.loss == doctest::Approx(6.5).epsilon(1e-12));
  CHECK(lg.grad.data[0] == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(lg.grad.data[1] == doctest::Approx(-3.0).epsilon(1e-12));
}

TEST_CASE("first adam step moves by nearly the learning rate") {
  Adam opt(1, 1e-3);
  std::vector<double> w{1.0};
  const std::vector<double> g{0.5};
  opt.step(w, g);
  CHECK(w[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-7));
}

TEST_CASE("adam is deterministic across instances") {
  Rng rng(306);
  std::vector<double> w1(10), g(10);
  for (std::size_t i = 0; i < 10; ++i) {
    w1[i] = rng.uniform(-1, 1);
    g[i] = rng.uniform(-1, 1);
  }
  std::vector<double> w2 = w1;
  Adam a(10), b(10);
  for (int it = 0; it < 25; ++it) {
    a.step(w1, g);
    b.step(w2, g);
  }
  CHECK(w1 == w2);
}

TEST_CASE("param store rejects duplicates and lays out parameters contiguously") {
  ParamStore store;
  const std::size_t a = store.add("w", {2, 3});
  const std::size_t b = store.add("b", {3});
  CHECK_THROWS_AS(store.add("w", {1}), std::invalid_argument);
  CHECK(store.entries()[a].offset == 0);
  CHECK(store.entries()[b].offset == 6);
  CHECK(store.total_size() == 9);
  store.grads(a)[0] = 5.0;
  store.zero_grads();
  CHECK(store.grads(a)[0] == 0.0);
}

TEST_CASE("he initialization is bounded, zero-biased, and seed-stable") {
  ParamStore s1, s2;
  Network n1(s1), n2(s2);
  n1.add<Dense>(s1, "fc", 50, 20);
  n2.add<Dense>(s2, "fc", 50, 20);
  Rng r1(42), r2(42);
  n1.init(r1);
  n2.init(r2);
  CHECK(std::equal(s1.flat_values().begin(), s1.flat_values().end(),
                   s2.flat_values().begin()));
  const double bound = std::sqrt(6.0 / 50.0);
  const auto w = s1.values(0);
  double mx = 0.0;
  for (double v : w) mx = std::max(mx, std::abs(v));
  CHECK(mx <= bound);
  CHECK(mx > 0.5 * bound);
  for (double v : s1.values(1)) CHECK(v == 0.0);
}

TEST_CASE("a consumed tape refuses further passes") {
  ParamStore store;
  Network net(store);
  net.add<Dense>(store, "fc", 3, 2);
  Rng rng(307);
  net.init(rng);
  const Tensor x = random_tensor({2, 3}, rng);
  Tape tape;
  const Tensor y = net.forward(x, tape);
  Tensor dy(y.shape);
  std::fill(dy.data.begin(), dy.data.end(), 1.0);
  net.backward(dy, tape);
  CHECK_THROWS_AS(net.backward(dy, tape), std::logic_error);
  CHECK_THROWS_AS(net.forward(x, tape), std::logic_error);
  tape.reset();
  net.forward(x, tape);  // usable again after reset
}

TEST_CASE("forward demands a fresh tape") {
  ParamStore store;
  Network net(store);
  net.add<Dense>(store, "fc", 3, 2);
  Rng rng(308);
  net.init(rng);
  const Tensor x = random_tensor({1, 3}, rng);
  Tape tape;
  net.forward(x, tape);
  CHECK_THROWS_AS(net.forward(x, tape), std::logic_error);
}

TEST_CASE("shape mismatches are rejected with invalid_argument") {
  ParamStore store;
  Network net(store);
  net.add<Dense>(store, "fc", 3, 2);
  Tape tape;
  CHECK_THROWS_AS(net.forward(Tensor({2, 4}), tape), std::invalid_argument);
  ParamStore s2;
  Network conv(s2);
  conv.add<Conv2d>(s2, "c", 3, 4);
  CHECK_THROWS_AS(conv.predict(Tensor({1, 2, 4, 4})), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({1, 2, 3, 4, 5}), std::invalid_argument);
}

TEST_CASE("batched forward equals per-sample forward") {
  ParamStore store;
  Network net(store);
  net.add<Conv2d>(store, "c1", 1, 4);
  net.add<Relu>();
  net.add<MaxPool2d>();
  net.add<GlobalAvgPool>();
  net.add<Dense>(store, "fc", 4, 3);
  Rng rng(309);
  net.init(rng);
  const Tensor batch = random_tensor({3, 1, 8, 8}, rng);
  const Tensor yb = net.predict(batch);
  for (int s = 0; s < 3; ++s) {
    Tensor one({1, 1, 8, 8});
    std::copy_n(batch.data.data() + static_cast<std::size_t>(s) * 64, 64, one.data.data());
    const Tensor ys = net.predict(one);
    for (int j = 0; j < 3; ++j)
      CHECK(ys.data[static_cast<std::size_t>(j)] ==
            yb.data[static_cast<std::size_t>(s) * 3 + j]);
  }
}

TEST_CASE("training a tiny net drives the loss down deterministically") {
  auto build = [](ParamStore& store) {
    Network net(store);
    net.add<Dense>(store, "fc1", 4, 8);
    net.add<Relu>();
    net.add<Dense>(store, "fc2", 8, 2);
    return net;
  };
  auto run = [&](std::uint64_t seed) {
    ParamStore store;
    Network net = build(store);
    Rng rng(seed);
    net.init(rng);
    const Tensor x = random_tensor({8, 4}, rng);
    const Tensor target = random_tensor({8, 2}, rng);
    Adam opt(store.total_size(), 1e-2);
    double first = 0.0, last = 0.0;
    for (int it = 0; it < 600; ++it) {
      store.zero_grads();
      Tape tape;
      const Tensor pred = net.forward(x, tape);
      const LossGrad lg = mse_loss(pred, target);
      if (it == 0) first = lg.loss;
      last = lg.loss;
      net.backward(lg.grad, tape);
      opt.step(store.flat_values(), store.flat_grads());
    }
    CHECK(last < 0.05 * first);
    return std::vector<double>(store.flat_values().begin(), store.flat_values().end());
  };
  const auto w1 = run(99);
  const auto w2 = run(99);
  CHECK(w1 == w2);
  const auto w3 = run(100);
  CHECK(w1 != w3);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  ParamStore store;
  Network net(store);
  net.add<Conv2d>(store, "enc.c1", 1, 2);
  net.add<Dense>(store, "head.fc", 2, 3);
  Rng rng(310);
  net.init(rng);

  const std::string p1 = temp_path("taxel_ckpt_a.bin");
  const std::string p2 = temp_path("taxel_ckpt_b.bin");
  save_checkpoint(p1, store, "unit test model");

  ParamStore store2;
  Network net2(store2);
  net2.add<Conv2d>(store2, "enc.c1", 1, 2);
  net2.add<Dense>(store2, "head.fc", 2, 3);
  load_checkpoint(p1, store2);
  CHECK(std::equal(store.flat_values().begin(), store.flat_values().end(),
                   store2.flat_values().begin()));
  CHECK(checkpoint_description(p1) == "unit test model");

  save_checkpoint(p2, store2, "unit test model");
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("checkpoints reject mismatched models") {
  ParamStore store;
  Network net(store);
  net.add<Dense>(store, "fc", 3, 2);
  Rng rng(311);
  net.init(rng);
  const std::string path = temp_path("taxel_ckpt_c.bin");
  save_checkpoint(path, store, "");

  ParamStore wrong_shape;
  Network n2(wrong_shape);
  n2.add<Dense>(wrong_shape, "fc", 3, 4);
  CHECK_THROWS_AS(load_checkpoint(path, wrong_shape), std::runtime_error);

  ParamStore wrong_name;
  Network n3(wrong_name);
  n3.add<Dense>(wrong_name, "other", 3, 2);
  CHECK_THROWS_AS(load_checkpoint(path, wrong_name), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_SUITE_END();
