// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode neural-network primitives: a dense tensor, a flat parameter
// store shared by every layer of a model, sequential layer containers with
// an explicit gradient tape, the two losses used by the pipeline, and Adam.
// All math is float64 and bit-deterministic for a fixed seed.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "taxel/common.hpp"

namespace taxel::nn {

/// Row-major dense tensor of rank 1 to 4.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  int rank() const { return static_cast<int>(shape.size()); }
  std::size_t size() const { return data.size(); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

std::size_t shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// Flat registry of named parameters. Values and gradients live in two
/// contiguous arrays so optimizers and checkpoints see one vector.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
  };

  /// Registers a new parameter and returns its entry index. Names must be
  /// unique across the store.
  std::size_t add(const std::string& name, const std::vector<int>& shape);

  std::span<double> values(std::size_t idx);
  std::span<const double> values(std::size_t idx) const;
  std::span<double> grads(std::size_t idx);

  std::span<double> flat_values() { return values_; }
  std::span<const double> flat_values() const { return values_; }
  std::span<double> flat_grads() { return grads_; }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t total_size() const { return values_.size(); }
  void zero_grads();

 private:
  std::vector<Entry> entries_;
  std::vector<double> values_;
  std::vector<double> grads_;
};

/// Per-layer activation records written during forward and consumed by
/// backward. A tape drives exactly one backward pass; reuse is a logic
/// error, as the stored activations no longer match the parameters.
class Tape {
 public:
  struct Frame {
    std::vector<Tensor> tensors;
    std::vector<std::vector<int>> ints;
  };

  Frame& push_frame();
  Frame& frame(std::size_t i) { return frames_.at(i); }
  std::size_t frame_count() const { return frames_.size(); }

  bool consumed() const { return consumed_; }
  void mark_consumed();
  void reset();

 private:
  std::vector<Frame> frames_;
  bool consumed_ = false;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Tape::Frame& frame) = 0;
  virtual Tensor backward(const Tensor& dy, Tape::Frame& frame) = 0;
  virtual void init(Rng& rng) { (void)rng; }
  virtual std::string name() const = 0;
};

/// 2D convolution over [N, C, H, W], odd kernel, stride 1, zero "same"
/// padding, implemented as im2col plus one matrix product per sample.
class Conv2d final : public Layer {
 public:
  Conv2d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int ksize = 3);
  Tensor forward(const Tensor& x, Tape::Frame& frame) override;
  Tensor backward(const Tensor& dy, Tape::Frame& frame) override;
  void init(Rng& rng) override;
  std::string name() const override { return name_; }

 private:
  ParamStore& store_;
  std::string name_;
  int in_ch_, out_ch_, k_;
  std::size_t w_, b_;
};

/// 1D convolution over [N, C, T], odd kernel, stride 1, zero "same" padding.
class Conv1d final : public Layer {
 public:
  Conv1d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int ksize = 3);
  Tensor forward(const Tensor& x, Tape::Frame& frame) override;
  Tensor backward(const Tensor& dy, Tape::Frame& frame) override;
  void init(Rng& rng) override;
  std::string name() const override { return name_; }

 private:
  ParamStore& store_;
  std::string name_;
  int in_ch_, out_ch_, k_;
  std::size_t w_, b_;
};

/// 2x2 max pooling with stride 2 over [N, C, H, W]; even H and W required.
class MaxPool2d final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape::Frame& frame) override;
  Tensor backward(const Tensor& dy, Tape::Frame& frame) override;
  std::string name() const override { return "maxpool2d"; }
};

/// Window-2 stride-2 max pooling over [N, C, T]; even T required.
class MaxPool1d final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape::Frame& frame) override;
  Tensor backward(const Tensor& dy, Tape::Frame& frame) override;
  std::string name() const override { return "maxpool1d"; }
};

/// Mean over all spatial positions: [N, C, ...] -> [N, C].
class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape::Frame& frame) override;
  Tensor backward(const Tensor& dy, Tape::Frame& frame) override;
  std::string name() const override { return "gap"; }
};

class Relu final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape::Frame& frame) override;
  Tensor backward(const Tensor& dy, Tape::Frame& frame) override;
  std::string name() const override { return "relu"; }
};

class Sigmoid final : public Layer {
 public:
  Tensor forward(const Tensor& x, Tape::Frame& frame) override;
  Tensor backward(const Tensor& dy, Tape::Frame& frame) override;
  std::string name() const override { return "sigmoid"; }
};

/// Fully connected map [N, in] -> [N, out].
class Dense final : public Layer {
 public:
  Dense(ParamStore& store, const std::string& name, int in, int out);
  Tensor forward(const Tensor& x, Tape::Frame& frame) override;
  Tensor backward(const Tensor& dy, Tape::Frame& frame) override;
  void init(Rng& rng) override;
  std::string name() const override { return name_; }

 private:
  ParamStore& store_;
  std::string name_;
  int in_, out_;
  std::size_t w_, b_;
};

/// Sequential container over a shared parameter store. The store outlives
/// the network; several networks may register into one store to form a
/// jointly trained model.
class Network {
 public:
  explicit Network(ParamStore& store) : store_(store) {}

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  /// Runs every layer, appending one tape frame each. The tape must be
  /// empty and unconsumed.
  Tensor forward(const Tensor& x, Tape& tape);

  /// Pulls gradients back through every layer, accumulating parameter
  /// gradients into the store, and marks the tape consumed.
  Tensor backward(const Tensor& dy, Tape& tape);

  /// Inference without recording.
  Tensor predict(const Tensor& x);

  void init(Rng& rng);
  ParamStore& store() { return store_; }
  std::size_t layer_count() const { return layers_.size(); }

 private:
  ParamStore& store_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct LossGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Mean softmax cross-entropy over the batch, stabilized with the row max.
LossGrad softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Row-wise softmax probabilities for evaluation.
Tensor softmax(const Tensor& logits);

/// Mean squared error over every element.
LossGrad mse_loss(const Tensor& pred, const Tensor& target);

/// Adam over the flat parameter array.
class Adam {
 public:
  explicit Adam(std::size_t n, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(std::span<double> values, std::span<const double> grads);
  long steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace taxel::nn
