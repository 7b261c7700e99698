// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include "taxel/twostream.hpp"

#include <algorithm>
#include <stdexcept>

namespace taxel::twostream {

using nn::Network;
using nn::Tensor;

const char* stream_mode_name(StreamMode mode) {
  switch (mode) {
    case StreamMode::Fused: return "fused";
    case StreamMode::ImageOnly: return "image_only";
    case StreamMode::ForceOnly: return "force_only";
  }
  throw std::invalid_argument("stream_mode_name: unknown mode");
}

StreamMode stream_mode_from_name(const std::string& name) {
  if (name == "fused") return StreamMode::Fused;
  if (name == "image_only") return StreamMode::ImageOnly;
  if (name == "force_only") return StreamMode::ForceOnly;
  throw std::invalid_argument("stream_mode_from_name: unknown mode \"" + name + "\"");
}

void ModelConfig::validate() const {
  if (image_size <= 0 || image_size % 32 != 0)
    throw std::invalid_argument("ModelConfig: image_size must be a positive multiple of 32");
  if (force_len <= 0 || force_len % 8 != 0)
    throw std::invalid_argument("ModelConfig: force_len must be a positive multiple of 8");
  if (num_classes < 2) throw std::invalid_argument("ModelConfig: num_classes must be >= 2");
}

Tensor attention_fuse(const Tensor& g, const Tensor& f, const Tensor& w) {
  if (g.shape != f.shape || g.shape != w.shape)
    throw std::invalid_argument("attention_fuse: feature shapes must match");
  Tensor j(g.shape);
  for (std::size_t i = 0; i < j.size(); ++i)
    j.data[i] = w.data[i] * g.data[i] + (1.0 - w.data[i]) * f.data[i];
  return j;
}

Model::Model(const ModelConfig& config)
    : config_(config), gate_net_(store_), head_(store_) {
  config_.validate();
  constexpr int d = kFeatureDim;

  if (config_.mode != StreamMode::ForceOnly) {
    // Basic stage 3 -> 16 -> 32 -> 64, then high-level stage 64 -> 128 ->
    // 128; a pool after every conv takes S down to S/32 before pooling out
    // the spatial axes entirely.
    img_enc_ = std::make_unique<Network>(store_);
    int in_ch = 3;
    int tag = 1;
    for (int out_ch : {16, 32, 64, 128, 128}) {
      img_enc_->add<nn::Conv2d>(store_, "img.c" + std::to_string(tag++), in_ch, out_ch);
      img_enc_->add<nn::Relu>();
      img_enc_->add<nn::MaxPool2d>();
      in_ch = out_ch;
    }
    img_enc_->add<nn::GlobalAvgPool>();
    img_enc_->add<nn::Dense>(store_, "img.fc", in_ch, d);
  }
  if (config_.mode != StreamMode::ImageOnly) {
    // Short kernels for local force variation, a wider middle kernel for
    // medium-term patterns, then averaging over what remains of time.
    frc_enc_ = std::make_unique<Network>(store_);
    frc_enc_->add<nn::Conv1d>(store_, "frc.c1", 1, 32, 3);
    frc_enc_->add<nn::Relu>();
    frc_enc_->add<nn::MaxPool1d>();
    frc_enc_->add<nn::Conv1d>(store_, "frc.c2", 32, 64, 5);
    frc_enc_->add<nn::Relu>();
    frc_enc_->add<nn::MaxPool1d>();
    frc_enc_->add<nn::Conv1d>(store_, "frc.c3", 64, d, 3);
    frc_enc_->add<nn::Relu>();
    frc_enc_->add<nn::MaxPool1d>();
    frc_enc_->add<nn::GlobalAvgPool>();
  }
  gate_net_.add<nn::Dense>(store_, "fuse.fc1", 2 * d, d);
  gate_net_.add<nn::Relu>();
  gate_net_.add<nn::Dense>(store_, "fuse.fc2", d, d);
  gate_net_.add<nn::Sigmoid>();

  head_.add<nn::Dense>(store_, "head.fc1", d, 64);
  head_.add<nn::Relu>();
  head_.add<nn::Dense>(store_, "head.fc2", 64, config_.num_classes);
}

Tensor Model::forward(const Tensor& depth, const Tensor& force, Pass& pass) {
  constexpr int d = kFeatureDim;
  if (img_enc_) pass.g = img_enc_->forward(depth, pass.img_tape);
  if (frc_enc_) pass.f = frc_enc_->forward(force, pass.frc_tape);
  if (img_enc_ && frc_enc_ && pass.g.dim(0) != pass.f.dim(0))
    throw std::invalid_argument("Model: depth and force batch sizes differ");

  // The absent stream contributes a zero feature; the gate still sees both
  // slots so every mode shares one architecture.
  const int n = img_enc_ ? pass.g.dim(0) : pass.f.dim(0);
  if (!img_enc_) pass.g = Tensor({n, d});
  if (!frc_enc_) pass.f = Tensor({n, d});

  Tensor concat({n, 2 * d});
  for (int s = 0; s < n; ++s) {
    std::copy_n(pass.g.data.data() + static_cast<std::size_t>(s) * d, d,
                concat.data.data() + static_cast<std::size_t>(s) * 2 * d);
    std::copy_n(pass.f.data.data() + static_cast<std::size_t>(s) * d, d,
                concat.data.data() + static_cast<std::size_t>(s) * 2 * d + d);
  }
  pass.w = gate_net_.forward(concat, pass.gate_tape);
  pass.joint = attention_fuse(pass.g, pass.f, pass.w);
  return head_.forward(pass.joint, pass.head_tape);
}

void Model::backward(const Tensor& dlogits, Pass& pass) {
  const Tensor djoint = head_.backward(dlogits, pass.head_tape);
  constexpr int d = kFeatureDim;
  const int n = pass.g.dim(0);

  // j = w*g + (1-w)*f, so dw = dj*(g-f), dg += dj*w, df += dj*(1-w); the
  // gate also feeds gradients back into both features through its input.
  Tensor dw(pass.w.shape);
  for (std::size_t i = 0; i < dw.size(); ++i)
    dw.data[i] = djoint.data[i] * (pass.g.data[i] - pass.f.data[i]);
  const Tensor dconcat = gate_net_.backward(dw, pass.gate_tape);

  Tensor dg(pass.g.shape), df(pass.f.shape);
  for (int s = 0; s < n; ++s)
    for (int k = 0; k < d; ++k) {
      const std::size_t i = static_cast<std::size_t>(s) * d + k;
      const std::size_t ci = static_cast<std::size_t>(s) * 2 * d + k;
      dg.data[i] = djoint.data[i] * pass.w.data[i] + dconcat.data[ci];
      df.data[i] = djoint.data[i] * (1.0 - pass.w.data[i]) + dconcat.data[ci + d];
    }
  if (img_enc_) img_enc_->backward(dg, pass.img_tape);
  if (frc_enc_) frc_enc_->backward(df, pass.frc_tape);
}

Tensor Model::predict(const Tensor& depth, const Tensor& force) {
  Pass pass;
  return forward(depth, force, pass);
}

Tensor Model::gate(const Tensor& depth, const Tensor& force) {
  Pass pass;
  forward(depth, force, pass);
  return pass.w;
}

void Model::init(Rng& rng) {
  if (img_enc_) img_enc_->init(rng);
  if (frc_enc_) frc_enc_->init(rng);
  gate_net_.init(rng);
  head_.init(rng);
}

ForceRegressor::ForceRegressor(int image_size) : image_size_(image_size), net_(store_) {
  if (image_size <= 0 || image_size % 8 != 0)
    throw std::invalid_argument("ForceRegressor: image_size must be a positive multiple of 8");
  int in_ch = 3;
  int tag = 1;
  for (int out_ch : {16, 32, 64}) {
    net_.add<nn::Conv2d>(store_, "reg.c" + std::to_string(tag++), in_ch, out_ch);
    net_.add<nn::Relu>();
    net_.add<nn::MaxPool2d>();
    in_ch = out_ch;
  }
  net_.add<nn::GlobalAvgPool>();
  net_.add<nn::Dense>(store_, "reg.fc", in_ch, 1);
}

Tensor ForceRegressor::forward(const Tensor& diff, nn::Tape& tape) {
  return net_.forward(diff, tape);
}

void ForceRegressor::backward(const Tensor& dout, nn::Tape& tape) {
  net_.backward(dout, tape);
}

Tensor ForceRegressor::predict(const Tensor& diff) {
  nn::Tape tape;
  return net_.forward(diff, tape);
}

void ForceRegressor::init(Rng& rng) { net_.init(rng); }

}  // namespace taxel::twostream
