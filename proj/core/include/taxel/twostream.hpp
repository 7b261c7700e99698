// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// Two-stream classifier: a 2D convolutional encoder over reconstructed
// depth maps and a 1D convolutional encoder over contact-force windows,
// each producing a 128-dimensional feature vector, fused by a learned
// sigmoid attention gate that mixes the two vectors element by element
// before a shared classification head. Single-stream variants route the
// present feature through the same gate with the other feature zeroed,
// keeping capacity matched for ablations.

#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "taxel/nn.hpp"

namespace taxel::twostream {

/// Width of both stream features and of the fused vector.
inline constexpr int kFeatureDim = 128;

enum class StreamMode { Fused, ImageOnly, ForceOnly };

const char* stream_mode_name(StreamMode mode);
StreamMode stream_mode_from_name(const std::string& name);

struct ModelConfig {
  StreamMode mode = StreamMode::Fused;
  int image_size = 64;  // square depth maps, divisible by 32 (five 2x pools)
  int force_len = 64;   // samples per force window, divisible by 8
  int num_classes = 32;

  void validate() const;
};

/// Elementwise gated mixture j = w * g + (1 - w) * f.
nn::Tensor attention_fuse(const nn::Tensor& g, const nn::Tensor& f, const nn::Tensor& w);

class Model {
 public:
  explicit Model(const ModelConfig& config);

  /// Activation context for one forward pass; drives exactly one backward.
  struct Pass {
    nn::Tape img_tape, frc_tape, gate_tape, head_tape;
    nn::Tensor g, f, w, joint;
  };

  /// depth: [N, 3, S, S] (depth, gx, gy channels); force: [N, 1, T].
  /// Returns class logits [N, K]. Single-stream modes ignore the unused
  /// input, which may be empty, and fuse against a zero feature.
  nn::Tensor forward(const nn::Tensor& depth, const nn::Tensor& force, Pass& pass);

  /// Backpropagates from logits, accumulating parameter gradients.
  void backward(const nn::Tensor& dlogits, Pass& pass);

  nn::Tensor predict(const nn::Tensor& depth, const nn::Tensor& force);

  /// Attention weights [N, kFeatureDim] for analysis.
  nn::Tensor gate(const nn::Tensor& depth, const nn::Tensor& force);

  void init(Rng& rng);
  nn::ParamStore& store() { return store_; }
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  nn::ParamStore store_;
  std::unique_ptr<nn::Network> img_enc_;
  std::unique_ptr<nn::Network> frc_enc_;
  nn::Network gate_net_;
  nn::Network head_;
};

/// Scalar force from an RGB frame difference [N, 3, H, W]; H, W divisible
/// by 8. Output [N, 1] in normalized units; multiply by the force scale.
class ForceRegressor {
 public:
  explicit ForceRegressor(int image_size);

  nn::Tensor forward(const nn::Tensor& diff, nn::Tape& tape);
  void backward(const nn::Tensor& dout, nn::Tape& tape);
  nn::Tensor predict(const nn::Tensor& diff);

  void init(Rng& rng);
  nn::ParamStore& store() { return store_; }
  int image_size() const { return image_size_; }

 private:
  int image_size_;
  nn::ParamStore store_;
  nn::Network net_;
};

}  // namespace taxel::twostream
