// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include "taxel/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace taxel::nn {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void he_uniform(std::span<double> w, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : w) v = rng.uniform(-bound, bound);
}

// Unfolds one [C, H, W] sample into [C*k*k, H*W] patch columns.
void im2col_2d(const double* x, int ch, int h, int w, int k, double* cols) {
  const int pad = (k - 1) / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::size_t row = 0;
  for (int c = 0; c < ch; ++c)
    for (int dr = 0; dr < k; ++dr)
      for (int dc = 0; dc < k; ++dc, ++row) {
        double* dst = cols + row * hw;
        const double* src = x + static_cast<std::size_t>(c) * hw;
        for (int r = 0; r < h; ++r) {
          const int rr = r + dr - pad;
          for (int cc = 0; cc < w; ++cc) {
            const int c2 = cc + dc - pad;
            dst[static_cast<std::size_t>(r) * w + cc] =
                (rr >= 0 && rr < h && c2 >= 0 && c2 < w)
                    ? src[static_cast<std::size_t>(rr) * w + c2]
                    : 0.0;
          }
        }
      }
}

// Scatter-adds [C*k*k, H*W] column gradients back onto a [C, H, W] sample.
void col2im_2d(const double* cols, int ch, int h, int w, int k, double* dx) {
  const int pad = (k - 1) / 2;
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::size_t row = 0;
  for (int c = 0; c < ch; ++c)
    for (int dr = 0; dr < k; ++dr)
      for (int dc = 0; dc < k; ++dc, ++row) {
        const double* src = cols + row * hw;
        double* dst = dx + static_cast<std::size_t>(c) * hw;
        for (int r = 0; r < h; ++r) {
          const int rr = r + dr - pad;
          if (rr < 0 || rr >= h) continue;
          for (int cc = 0; cc < w; ++cc) {
            const int c2 = cc + dc - pad;
            if (c2 < 0 || c2 >= w) continue;
            dst[static_cast<std::size_t>(rr) * w + c2] +=
                src[static_cast<std::size_t>(r) * w + cc];
          }
        }
      }
}

void im2col_1d(const double* x, int ch, int t, int k, double* cols) {
  const int pad = (k - 1) / 2;
  std::size_t row = 0;
  for (int c = 0; c < ch; ++c)
    for (int dk = 0; dk < k; ++dk, ++row) {
      double* dst = cols + row * static_cast<std::size_t>(t);
      const double* src = x + static_cast<std::size_t>(c) * t;
      for (int i = 0; i < t; ++i) {
        const int j = i + dk - pad;
        dst[i] = (j >= 0 && j < t) ? src[j] : 0.0;
      }
    }
}

void col2im_1d(const double* cols, int ch, int t, int k, double* dx) {
  const int pad = (k - 1) / 2;
  std::size_t row = 0;
  for (int c = 0; c < ch; ++c)
    for (int dk = 0; dk < k; ++dk, ++row) {
      const double* src = cols + row * static_cast<std::size_t>(t);
      double* dst = dx + static_cast<std::size_t>(c) * t;
      for (int i = 0; i < t; ++i) {
        const int j = i + dk - pad;
        if (j >= 0 && j < t) dst[j] += src[i];
      }
    }
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  if (shape.empty() || shape.size() > 4)
    throw std::invalid_argument("Tensor: rank must be 1 to 4");
  for (int d : shape)
    if (d <= 0) throw std::invalid_argument("Tensor: dimensions must be positive");
  data.assign(shape_size(shape), 0.0);
}

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t ParamStore::add(const std::string& name, const std::vector<int>& shape) {
  for (const Entry& e : entries_)
    if (e.name == name)
      throw std::invalid_argument("ParamStore: duplicate parameter name \"" + name + "\"");
  Entry e;
  e.name = name;
  e.shape = shape;
  e.offset = values_.size();
  e.size = shape_size(shape);
  if (e.size == 0) throw std::invalid_argument("ParamStore: empty parameter \"" + name + "\"");
  entries_.push_back(e);
  values_.resize(values_.size() + e.size, 0.0);
  grads_.resize(values_.size(), 0.0);
  return entries_.size() - 1;
}

std::span<double> ParamStore::values(std::size_t idx) {
  const Entry& e = entries_.at(idx);
  return {values_.data() + e.offset, e.size};
}

std::span<const double> ParamStore::values(std::size_t idx) const {
  const Entry& e = entries_.at(idx);
  return {values_.data() + e.offset, e.size};
}

std::span<double> ParamStore::grads(std::size_t idx) {
  const Entry& e = entries_.at(idx);
  return {grads_.data() + e.offset, e.size};
}

void ParamStore::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

Tape::Frame& Tape::push_frame() {
  if (consumed_) throw std::logic_error("Tape: cannot record on a consumed tape");
  frames_.emplace_back();
  return frames_.back();
}

void Tape::mark_consumed() {
  if (consumed_) throw std::logic_error("Tape: already consumed");
  consumed_ = true;
}

void Tape::reset() {
  frames_.clear();
  consumed_ = false;
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int ksize)
    : store_(store), name_(name), in_ch_(in_ch), out_ch_(out_ch), k_(ksize) {
  require(in_ch > 0 && out_ch > 0, name + ": channel counts must be positive");
  require(ksize >= 1 && ksize % 2 == 1, name + ": kernel size must be odd");
  w_ = store_.add(name + ".w", {out_ch_, in_ch_, k_, k_});
  b_ = store_.add(name + ".b", {out_ch_});
}

void Conv2d::init(Rng& rng) { he_uniform(store_.values(w_), in_ch_ * k_ * k_, rng); }

Tensor Conv2d::forward(const Tensor& x, Tape::Frame& frame) {
  require(x.rank() == 4 && x.dim(1) == in_ch_,
          name_ + ": expected [N," + std::to_string(in_ch_) + ",H,W], got " + shape_str(x.shape));
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int ckk = in_ch_ * k_ * k_;
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  Tensor y({n, out_ch_, h, w});
  std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
  MapCM wm(store_.values(w_).data(), out_ch_, ckk);
  const std::span<const double> bias = store_.values(b_);
  for (int s = 0; s < n; ++s) {
    im2col_2d(x.data.data() + static_cast<std::size_t>(s) * in_ch_ * hw, in_ch_, h, w, k_,
              cols.data());
    MapCM cm(cols.data(), ckk, static_cast<Eigen::Index>(hw));
    MapM ym(y.data.data() + static_cast<std::size_t>(s) * out_ch_ * hw, out_ch_,
            static_cast<Eigen::Index>(hw));
    ym.noalias() = wm * cm;
    for (int o = 0; o < out_ch_; ++o) ym.row(o).array() += bias[static_cast<std::size_t>(o)];
  }
  frame.tensors.push_back(x);
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, Tape::Frame& frame) {
  const Tensor& x = frame.tensors.at(0);
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  require(dy.rank() == 4 && dy.dim(0) == n && dy.dim(1) == out_ch_ && dy.dim(2) == h &&
              dy.dim(3) == w,
          name_ + ": gradient shape mismatch");
  const int ckk = in_ch_ * k_ * k_;
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  Tensor dx(x.shape);
  std::vector<double> cols(static_cast<std::size_t>(ckk) * hw);
  std::vector<double> dcols(cols.size());
  MapCM wm(store_.values(w_).data(), out_ch_, ckk);
  MapM dwm(store_.grads(w_).data(), out_ch_, ckk);
  std::span<double> db = store_.grads(b_);
  for (int s = 0; s < n; ++s) {
    im2col_2d(x.data.data() + static_cast<std::size_t>(s) * in_ch_ * hw, in_ch_, h, w, k_,
              cols.data());
    MapCM cm(cols.data(), ckk, static_cast<Eigen::Index>(hw));
    MapCM dym(dy.data.data() + static_cast<std::size_t>(s) * out_ch_ * hw, out_ch_,
              static_cast<Eigen::Index>(hw));
    dwm.noalias() += dym * cm.transpose();
    for (int o = 0; o < out_ch_; ++o) db[static_cast<std::size_t>(o)] += dym.row(o).sum();
    MapM dcm(dcols.data(), ckk, static_cast<Eigen::Index>(hw));
    dcm.noalias() = wm.transpose() * dym;
    col2im_2d(dcols.data(), in_ch_, h, w, k_,
              dx.data.data() + static_cast<std::size_t>(s) * in_ch_ * hw);
  }
  return dx;
}

Conv1d::Conv1d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int ksize)
    : store_(store), name_(name), in_ch_(in_ch), out_ch_(out_ch), k_(ksize) {
  require(in_ch > 0 && out_ch > 0, name + ": channel counts must be positive");
  require(ksize >= 1 && ksize % 2 == 1, name + ": kernel size must be odd");
  w_ = store_.add(name + ".w", {out_ch_, in_ch_, k_});
  b_ = store_.add(name + ".b", {out_ch_});
}

void Conv1d::init(Rng& rng) { he_uniform(store_.values(w_), in_ch_ * k_, rng); }

Tensor Conv1d::forward(const Tensor& x, Tape::Frame& frame) {
  require(x.rank() == 3 && x.dim(1) == in_ch_,
          name_ + ": expected [N," + std::to_string(in_ch_) + ",T], got " + shape_str(x.shape));
  const int n = x.dim(0), t = x.dim(2);
  const int ck = in_ch_ * k_;

  Tensor y({n, out_ch_, t});
  std::vector<double> cols(static_cast<std::size_t>(ck) * t);
  MapCM wm(store_.values(w_).data(), out_ch_, ck);
  const std::span<const double> bias = store_.values(b_);
  for (int s = 0; s < n; ++s) {
    im2col_1d(x.data.data() + static_cast<std::size_t>(s) * in_ch_ * t, in_ch_, t, k_,
              cols.data());
    MapCM cm(cols.data(), ck, t);
    MapM ym(y.data.data() + static_cast<std::size_t>(s) * out_ch_ * t, out_ch_, t);
    ym.noalias() = wm * cm;
    for (int o = 0; o < out_ch_; ++o) ym.row(o).array() += bias[static_cast<std::size_t>(o)];
  }
  frame.tensors.push_back(x);
  return y;
}

Tensor Conv1d::backward(const Tensor& dy, Tape::Frame& frame) {
  const Tensor& x = frame.tensors.at(0);
  const int n = x.dim(0), t = x.dim(2);
  require(dy.rank() == 3 && dy.dim(0) == n && dy.dim(1) == out_ch_ && dy.dim(2) == t,
          name_ + ": gradient shape mismatch");
  const int ck = in_ch_ * k_;

  Tensor dx(x.shape);
  std::vector<double> cols(static_cast<std::size_t>(ck) * t);
  std::vector<double> dcols(cols.size());
  MapCM wm(store_.values(w_).data(), out_ch_, ck);
  MapM dwm(store_.grads(w_).data(), out_ch_, ck);
  std::span<double> db = store_.grads(b_);
  for (int s = 0; s < n; ++s) {
    im2col_1d(x.data.data() + static_cast<std::size_t>(s) * in_ch_ * t, in_ch_, t, k_,
              cols.data());
    MapCM cm(cols.data(), ck, t);
    MapCM dym(dy.data.data() + static_cast<std::size_t>(s) * out_ch_ * t, out_ch_, t);
    dwm.noalias() += dym * cm.transpose();
    for (int o = 0; o < out_ch_; ++o) db[static_cast<std::size_t>(o)] += dym.row(o).sum();
    MapM dcm(dcols.data(), ck, t);
    dcm.noalias() = wm.transpose() * dym;
    col2im_1d(dcols.data(), in_ch_, t, k_,
              dx.data.data() + static_cast<std::size_t>(s) * in_ch_ * t);
  }
  return dx;
}

Tensor MaxPool2d::forward(const Tensor& x, Tape::Frame& frame) {
  require(x.rank() == 4, "maxpool2d: expected [N,C,H,W], got " + shape_str(x.shape));
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "maxpool2d: spatial dims must be even");
  const int ho = h / 2, wo = w / 2;

  Tensor y({n, c, ho, wo});
  std::vector<int> arg(y.size());
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::size_t oi = 0;
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = x.data.data() + (static_cast<std::size_t>(s) * c + ch) * hw;
      for (int r = 0; r < ho; ++r)
        for (int q = 0; q < wo; ++q, ++oi) {
          int best = (2 * r) * w + 2 * q;
          double bv = plane[best];
          for (const int cand : {(2 * r) * w + 2 * q + 1, (2 * r + 1) * w + 2 * q,
                                 (2 * r + 1) * w + 2 * q + 1})
            if (plane[cand] > bv) {
              bv = plane[cand];
              best = cand;
            }
          y.data[oi] = bv;
          arg[oi] = best;
        }
    }
  frame.ints.push_back(std::move(arg));
  frame.ints.push_back(x.shape);
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy, Tape::Frame& frame) {
  const std::vector<int>& arg = frame.ints.at(0);
  const std::vector<int>& xs = frame.ints.at(1);
  require(dy.size() == arg.size(), "maxpool2d: gradient shape mismatch");
  Tensor dx({xs[0], xs[1], xs[2], xs[3]});
  const int h = xs[2], w = xs[3];
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  const std::size_t per = static_cast<std::size_t>(h / 2) * (w / 2);
  const std::size_t planes = dy.size() / per;
  std::size_t oi = 0;
  for (std::size_t p = 0; p < planes; ++p) {
    double* plane = dx.data.data() + p * hw;
    for (std::size_t k = 0; k < per; ++k, ++oi)
      plane[static_cast<std::size_t>(arg[oi])] += dy.data[oi];
  }
  return dx;
}

Tensor MaxPool1d::forward(const Tensor& x, Tape::Frame& frame) {
  require(x.rank() == 3, "maxpool1d: expected [N,C,T], got " + shape_str(x.shape));
  const int n = x.dim(0), c = x.dim(1), t = x.dim(2);
  require(t % 2 == 0, "maxpool1d: time dim must be even");
  const int to = t / 2;

  Tensor y({n, c, to});
  std::vector<int> arg(y.size());
  std::size_t oi = 0;
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const double* line = x.data.data() + (static_cast<std::size_t>(s) * c + ch) * t;
      for (int i = 0; i < to; ++i, ++oi) {
        const int a = 2 * i, b = 2 * i + 1;
        const bool right = line[b] > line[a];
        y.data[oi] = right ? line[b] : line[a];
        arg[oi] = right ? b : a;
      }
    }
  frame.ints.push_back(std::move(arg));
  frame.ints.push_back(x.shape);
  return y;
}

Tensor MaxPool1d::backward(const Tensor& dy, Tape::Frame& frame) {
  const std::vector<int>& arg = frame.ints.at(0);
  const std::vector<int>& xs = frame.ints.at(1);
  require(dy.size() == arg.size(), "maxpool1d: gradient shape mismatch");
  Tensor dx({xs[0], xs[1], xs[2]});
  const int t = xs[2];
  const std::size_t lines = dy.size() / static_cast<std::size_t>(t / 2);
  std::size_t oi = 0;
  for (std::size_t p = 0; p < lines; ++p) {
    double* line = dx.data.data() + p * static_cast<std::size_t>(t);
    for (int i = 0; i < t / 2; ++i, ++oi) line[static_cast<std::size_t>(arg[oi])] += dy.data[oi];
  }
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Tape::Frame& frame) {
  require(x.rank() >= 3, "gap: expected [N,C,spatial...], got " + shape_str(x.shape));
  const int n = x.dim(0), c = x.dim(1);
  std::size_t spatial = 1;
  for (int i = 2; i < x.rank(); ++i) spatial *= static_cast<std::size_t>(x.dim(i));

  Tensor y({n, c});
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const double* base = x.data.data() + (static_cast<std::size_t>(s) * c + ch) * spatial;
      double acc = 0.0;
      for (std::size_t i = 0; i < spatial; ++i) acc += base[i];
      y.data[static_cast<std::size_t>(s) * c + ch] = acc / static_cast<double>(spatial);
    }
  frame.ints.push_back(x.shape);
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy, Tape::Frame& frame) {
  const std::vector<int>& xs = frame.ints.at(0);
  Tensor dx(xs);
  const int n = xs[0], c = xs[1];
  std::size_t spatial = 1;
  for (std::size_t i = 2; i < xs.size(); ++i) spatial *= static_cast<std::size_t>(xs[i]);
  require(dy.size() == static_cast<std::size_t>(n) * c, "gap: gradient shape mismatch");
  const double inv = 1.0 / static_cast<double>(spatial);
  for (int s = 0; s < n; ++s)
    for (int ch = 0; ch < c; ++ch) {
      const double g = dy.data[static_cast<std::size_t>(s) * c + ch] * inv;
      double* base = dx.data.data() + (static_cast<std::size_t>(s) * c + ch) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) base[i] = g;
    }
  return dx;
}

Tensor Relu::forward(const Tensor& x, Tape::Frame& frame) {
  Tensor y = x;
  for (double& v : y.data) v = std::max(0.0, v);
  frame.tensors.push_back(x);
  return y;
}

Tensor Relu::backward(const Tensor& dy, Tape::Frame& frame) {
  const Tensor& x = frame.tensors.at(0);
  require(dy.size() == x.size(), "relu: gradient shape mismatch");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (x.data[i] <= 0.0) dx.data[i] = 0.0;
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, Tape::Frame& frame) {
  Tensor y = x;
  for (double& v : y.data) v = sigmoid_scalar(v);
  frame.tensors.push_back(y);
  return y;
}

Tensor Sigmoid::backward(const Tensor& dy, Tape::Frame& frame) {
  const Tensor& y = frame.tensors.at(0);
  require(dy.size() == y.size(), "sigmoid: gradient shape mismatch");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] *= y.data[i] * (1.0 - y.data[i]);
  return dx;
}

Dense::Dense(ParamStore& store, const std::string& name, int in, int out)
    : store_(store), name_(name), in_(in), out_(out) {
  require(in > 0 && out > 0, name + ": feature counts must be positive");
  w_ = store_.add(name + ".w", {out_, in_});
  b_ = store_.add(name + ".b", {out_});
}

void Dense::init(Rng& rng) { he_uniform(store_.values(w_), in_, rng); }

Tensor Dense::forward(const Tensor& x, Tape::Frame& frame) {
  require(x.rank() == 2 && x.dim(1) == in_,
          name_ + ": expected [N," + std::to_string(in_) + "], got " + shape_str(x.shape));
  const int n = x.dim(0);
  Tensor y({n, out_});
  MapCM xm(x.data.data(), n, in_);
  MapCM wm(store_.values(w_).data(), out_, in_);
  MapM ym(y.data.data(), n, out_);
  ym.noalias() = xm * wm.transpose();
  const std::span<const double> bias = store_.values(b_);
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < out_; ++o) y.data[static_cast<std::size_t>(s) * out_ + o] +=
        bias[static_cast<std::size_t>(o)];
  frame.tensors.push_back(x);
  return y;
}

Tensor Dense::backward(const Tensor& dy, Tape::Frame& frame) {
  const Tensor& x = frame.tensors.at(0);
  const int n = x.dim(0);
  require(dy.rank() == 2 && dy.dim(0) == n && dy.dim(1) == out_,
          name_ + ": gradient shape mismatch");
  Tensor dx(x.shape);
  MapCM xm(x.data.data(), n, in_);
  MapCM dym(dy.data.data(), n, out_);
  MapCM wm(store_.values(w_).data(), out_, in_);
  MapM dwm(store_.grads(w_).data(), out_, in_);
  MapM dxm(dx.data.data(), n, in_);
  dwm.noalias() += dym.transpose() * xm;
  dxm.noalias() = dym * wm;
  std::span<double> db = store_.grads(b_);
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < out_; ++o)
      db[static_cast<std::size_t>(o)] += dy.data[static_cast<std::size_t>(s) * out_ + o];
  return dx;
}

Tensor Network::forward(const Tensor& x, Tape& tape) {
  if (tape.consumed() || tape.frame_count() != 0)
    throw std::logic_error("Network: forward requires a fresh tape");
  Tensor cur = x;
  for (auto& layer : layers_) cur = layer->forward(cur, tape.push_frame());
  return cur;
}

Tensor Network::backward(const Tensor& dy, Tape& tape) {
  if (tape.consumed())
    throw std::logic_error("Network: tape already consumed by a backward pass");
  if (tape.frame_count() != layers_.size())
    throw std::logic_error("Network: tape does not match this network's forward pass");
  Tensor cur = dy;
  for (std::size_t i = layers_.size(); i-- > 0;)
    cur = layers_[i]->backward(cur, tape.frame(i));
  tape.mark_consumed();
  return cur;
}

Tensor Network::predict(const Tensor& x) {
  Tape tape;
  return forward(x, tape);
}

void Network::init(Rng& rng) {
  for (auto& layer : layers_) layer->init(rng);
}

LossGrad softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require(logits.rank() == 2, "softmax_cross_entropy: logits must be [N,K]");
  const int n = logits.dim(0), k = logits.dim(1);
  require(labels.size() == static_cast<std::size_t>(n),
          "softmax_cross_entropy: one label per row required");

  LossGrad out;
  out.grad = Tensor(logits.shape);
  double total = 0.0;
  for (int s = 0; s < n; ++s) {
    const int label = labels[static_cast<std::size_t>(s)];
    require(label >= 0 && label < k, "softmax_cross_entropy: label out of range");
    const double* row = logits.data.data() + static_cast<std::size_t>(s) * k;
    double* grow = out.grad.data.data() + static_cast<std::size_t>(s) * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double logz = std::log(z) + mx;
    total += logz - row[label];
    for (int j = 0; j < k; ++j)
      grow[j] = (std::exp(row[j] - logz) - (j == label ? 1.0 : 0.0)) / static_cast<double>(n);
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

Tensor softmax(const Tensor& logits) {
  require(logits.rank() == 2, "softmax: logits must be [N,K]");
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor p(logits.shape);
  for (int s = 0; s < n; ++s) {
    const double* row = logits.data.data() + static_cast<std::size_t>(s) * k;
    double* prow = p.data.data() + static_cast<std::size_t>(s) * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (int j = 0; j < k; ++j) {
      prow[j] = std::exp(row[j] - mx);
      z += prow[j];
    }
    for (int j = 0; j < k; ++j) prow[j] /= z;
  }
  return p;
}

LossGrad mse_loss(const Tensor& pred, const Tensor& target) {
  require(pred.shape == target.shape, "mse_loss: shape mismatch");
  LossGrad out;
  out.grad = Tensor(pred.shape);
  const double inv = 1.0 / static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    total += d * d;
    out.grad.data[i] = 2.0 * d * inv;
  }
  out.loss = total * inv;
  return out;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> values, std::span<const double> grads) {
  if (values.size() != m_.size() || grads.size() != m_.size())
    throw std::invalid_argument("Adam: parameter count changed after construction");
  t_ += 1;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    values[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

}  // namespace taxel::nn
