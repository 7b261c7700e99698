// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "taxel/checkpoint.hpp"
#include "taxel/common.hpp"
#include "taxel/twostream.hpp"

using namespace taxel;
using namespace taxel::nn;
using namespace taxel::twostream;

namespace {

ModelConfig toy_config(StreamMode mode) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.image_size = 32;
  cfg.force_len = 8;
  cfg.num_classes = 3;
  return cfg;
}

Tensor random_depth(Rng& rng, int n, int s) {
  Tensor t({n, 3, s, s});
  for (double& v : t.data) v = rng.normal() * 0.3;
  return t;
}

Tensor random_force(Rng& rng, int n, int len) {
  Tensor t({n, 1, len});
  for (double& v : t.data) v = rng.normal() * 0.3;
  return t;
}

double model_loss(Model& model, const Tensor& depth, const Tensor& force,
                  const std::vector<int>& labels) {
  Model::Pass pass;
  const Tensor logits = model.forward(depth, force, pass);
  return softmax_cross_entropy(logits, labels).loss;
}

}  // namespace

TEST_SUITE_BEGIN("twostream");

TEST_CASE("feature vectors and logits have the contract shapes") {
  Rng rng(11);
  ModelConfig cfg;
  cfg.image_size = 64;
  cfg.force_len = 64;
  cfg.num_classes = 32;
  Model model(cfg);
  model.init(rng);

  Model::Pass pass;
  const Tensor logits =
      model.forward(random_depth(rng, 2, 64), random_force(rng, 2, 64), pass);
  CHECK(pass.g.shape == std::vector<int>{2, kFeatureDim});
  CHECK(pass.f.shape == std::vector<int>{2, kFeatureDim});
  CHECK(pass.w.shape == std::vector<int>{2, kFeatureDim});
  CHECK(logits.shape == std::vector<int>{2, 32});
}

TEST_CASE("attention fusion algebra") {
  Rng rng(7);
  Tensor g({2, 4}), f({2, 4}), w({2, 4});
  for (double& v : g.data) v = rng.normal();
  for (double& v : f.data) v = rng.normal();

  SUBCASE("all-ones gate returns the image feature") {
    std::fill(w.data.begin(), w.data.end(), 1.0);
    const Tensor j = attention_fuse(g, f, w);
    for (std::size_t i = 0; i < j.size(); ++i) CHECK(j.data[i] == g.data[i]);
  }
  SUBCASE("all-zeros gate returns the force feature") {
    std::fill(w.data.begin(), w.data.end(), 0.0);
    const Tensor j = attention_fuse(g, f, w);
    for (std::size_t i = 0; i < j.size(); ++i) CHECK(j.data[i] == f.data[i]);
  }
  SUBCASE("identical features are a fixed point for any gate") {
    for (double& v : w.data) v = rng.uniform();
    const Tensor j = attention_fuse(g, g, w);
    for (std::size_t i = 0; i < j.size(); ++i)
      CHECK(j.data[i] == doctest::Approx(g.data[i]).epsilon(1e-14));
  }
  SUBCASE("fused value stays inside the per-component envelope") {
    for (double& v : w.data) v = rng.uniform();
    const Tensor j = attention_fuse(g, f, w);
    for (std::size_t i = 0; i < j.size(); ++i) {
      CHECK(j.data[i] >= std::min(g.data[i], f.data[i]) - 1e-12);
      CHECK(j.data[i] <= std::max(g.data[i], f.data[i]) + 1e-12);
    }
  }
}

TEST_CASE("gate weights lie strictly inside (0, 1)") {
  Rng rng(23);
  Model model(toy_config(StreamMode::Fused));
  model.init(rng);
  const Tensor w = model.gate(random_depth(rng, 3, 32), random_force(rng, 3, 8));
  for (double v : w.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("full fused chain matches central finite differences") {
  Rng rng(31);
  Model model(toy_config(StreamMode::Fused));
  model.init(rng);

  const Tensor depth = random_depth(rng, 2, 32);
  const Tensor force = random_force(rng, 2, 8);
  const std::vector<int> labels{1, 2};

  Model::Pass pass;
  const Tensor logits = model.forward(depth, force, pass);
  const LossGrad lg = softmax_cross_entropy(logits, labels);
  model.store().zero_grads();
  model.backward(lg.grad, pass);

  auto& store = model.store();
  const std::vector<double> analytic(store.flat_grads().begin(), store.flat_grads().end());
  const double eps = 1e-6;
  Rng pick(97);
  double worst = 0.0;
  for (const auto& entry : store.entries()) {
    // A seeded sample of each tensor keeps the finite-difference sweep
    // tractable while still touching every parameter kind.
    const std::size_t samples = std::min<std::size_t>(entry.size, 8);
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t i = entry.offset + pick.bounded(entry.size);
      const double saved = store.flat_values()[i];
      store.flat_values()[i] = saved + eps;
      const double lp = model_loss(model, depth, force, labels);
      store.flat_values()[i] = saved - eps;
      const double lm = model_loss(model, depth, force, labels);
      store.flat_values()[i] = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-10});
      worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("single-stream modes fuse against a zero feature") {
  Rng rng(41);
  Model model(toy_config(StreamMode::ImageOnly));
  model.init(rng);
  Model::Pass pass;
  model.forward(random_depth(rng, 2, 32), Tensor(), pass);
  for (double v : pass.f.data) CHECK(v == 0.0);
  for (std::size_t i = 0; i < pass.joint.size(); ++i)
    CHECK(pass.joint.data[i] ==
          doctest::Approx(pass.w.data[i] * pass.g.data[i]).epsilon(1e-13));
}

TEST_CASE("force-only predictions are blind to the depth input") {
  Rng rng(43);
  Model model(toy_config(StreamMode::ForceOnly));
  model.init(rng);
  const Tensor force = random_force(rng, 2, 8);
  const Tensor a = model.predict(Tensor(), force);
  const Tensor b = model.predict(random_depth(rng, 2, 32), force);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("image-only predictions are blind to the force input") {
  Rng rng(47);
  Model model(toy_config(StreamMode::ImageOnly));
  model.init(rng);
  const Tensor depth = random_depth(rng, 2, 32);
  const Tensor a = model.predict(depth, Tensor());
  const Tensor b = model.predict(depth, random_force(rng, 2, 8));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("forward is deterministic") {
  Rng rng(53);
  Model model(toy_config(StreamMode::Fused));
  model.init(rng);
  const Tensor depth = random_depth(rng, 2, 32);
  const Tensor force = random_force(rng, 2, 8);
  const Tensor a = model.predict(depth, force);
  const Tensor b = model.predict(depth, force);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("zeroed head yields a uniform class distribution") {
  Rng rng(59);
  Model model(toy_config(StreamMode::Fused));
  model.init(rng);
  auto vals = model.store().flat_values();
  for (const auto& entry : model.store().entries())
    if (entry.name.rfind("head.", 0) == 0)
      std::fill_n(vals.begin() + static_cast<std::ptrdiff_t>(entry.offset), entry.size, 0.0);
  const Tensor logits = model.predict(random_depth(rng, 2, 32), random_force(rng, 2, 8));
  const Tensor probs = softmax(logits);
  for (double p : probs.data) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("expected parameter tensors are registered") {
  Model model(toy_config(StreamMode::Fused));
  std::vector<std::string> names;
  for (const auto& entry : model.store().entries()) names.push_back(entry.name);
  for (const char* expect :
       {"img.c1.w", "img.c5.w", "img.fc.w", "frc.c1.w", "frc.c2.w", "frc.c3.w",
        "fuse.fc1.w", "fuse.fc2.w", "head.fc1.w", "head.fc2.w"})
    CHECK(std::find(names.begin(), names.end(), expect) != names.end());
}

TEST_CASE("mismatched batch sizes are rejected") {
  Rng rng(61);
  Model model(toy_config(StreamMode::Fused));
  model.init(rng);
  Model::Pass pass;
  CHECK_THROWS_AS(model.forward(random_depth(rng, 2, 32), random_force(rng, 3, 8), pass),
                  std::invalid_argument);
}

TEST_CASE("config validation rejects bad dimensions") {
  ModelConfig cfg = toy_config(StreamMode::Fused);
  cfg.image_size = 48;
  CHECK_THROWS_AS(Model{cfg}, std::invalid_argument);
  cfg = toy_config(StreamMode::Fused);
  cfg.force_len = 12;
  CHECK_THROWS_AS(Model{cfg}, std::invalid_argument);
  cfg = toy_config(StreamMode::Fused);
  cfg.num_classes = 1;
  CHECK_THROWS_AS(Model{cfg}, std::invalid_argument);
}

TEST_CASE("a pass drives exactly one backward") {
  Rng rng(67);
  Model model(toy_config(StreamMode::Fused));
  model.init(rng);
  Model::Pass pass;
  const Tensor logits = model.forward(random_depth(rng, 2, 32), random_force(rng, 2, 8), pass);
  const LossGrad lg = softmax_cross_entropy(logits, {0, 1});
  model.backward(lg.grad, pass);
  CHECK_THROWS_AS(model.backward(lg.grad, pass), std::logic_error);
}

TEST_CASE("checkpoint round trip preserves predictions exactly") {
  Rng rng(71);
  Model model(toy_config(StreamMode::Fused));
  model.init(rng);
  const Tensor depth = random_depth(rng, 2, 32);
  const Tensor force = random_force(rng, 2, 8);
  const Tensor before = model.predict(depth, force);

  const auto path = std::filesystem::temp_directory_path() / "taxel_twostream_ckpt.bin";
  save_checkpoint(path.string(), model.store(), "twostream test");
  Model reloaded(toy_config(StreamMode::Fused));
  load_checkpoint(path.string(), reloaded.store());
  const Tensor after = reloaded.predict(depth, force);
  std::filesystem::remove(path);

  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before.data[i] == after.data[i]);
}

TEST_CASE("force regressor maps frame differences to one scalar") {
  Rng rng(73);
  ForceRegressor reg(16);
  reg.init(rng);
  Tensor diff({4, 3, 16, 16});
  for (double& v : diff.data) v = rng.normal() * 0.1;
  const Tensor out = reg.predict(diff);
  CHECK(out.shape == std::vector<int>{4, 1});
}

TEST_CASE("zeroed force regressor predicts zero on a zero difference") {
  ForceRegressor reg(16);
  const Tensor out = reg.predict(Tensor({1, 3, 16, 16}));
  CHECK(out.data[0] == 0.0);
}

TEST_CASE("force regressor gradients match finite differences") {
  Rng rng(79);
  ForceRegressor reg(8);
  reg.init(rng);
  Tensor diff({2, 3, 8, 8});
  for (double& v : diff.data) v = rng.normal() * 0.2;
  Tensor target({2, 1});
  target.data = {0.4, -0.2};

  nn::Tape tape;
  const Tensor pred = reg.forward(diff, tape);
  const LossGrad lg = mse_loss(pred, target);
  reg.store().zero_grads();
  reg.backward(lg.grad, tape);

  auto& store = reg.store();
  const std::vector<double> analytic(store.flat_grads().begin(), store.flat_grads().end());
  const double eps = 1e-6;
  Rng pick(83);
  double worst = 0.0;
  for (const auto& entry : store.entries()) {
    const std::size_t samples = std::min<std::size_t>(entry.size, 8);
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t i = entry.offset + pick.bounded(entry.size);
      const double saved = store.flat_values()[i];
      store.flat_values()[i] = saved + eps;
      const double lp = mse_loss(reg.predict(diff), target).loss;
      store.flat_values()[i] = saved - eps;
      const double lm = mse_loss(reg.predict(diff), target).loss;
      store.flat_values()[i] = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-10});
      worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_SUITE_END();
