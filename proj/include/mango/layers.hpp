#pragma once

// Minimal layer framework with explicit per-pass caches. Weights live inside
// the layers; activations live in caller-owned NetCache objects, so one set
// of weights can run several forward passes per step (generator pass, re-
// encoding pass, identity pass) and each backward accumulates into the same
// parameter gradients. Convolution is im2col + GEMM; backward recomputes the
// column matrix from the cached input instead of storing it.

#include "mango/image.hpp"
#include "mango/rng.hpp"
#include "mango/tensor.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mango {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct ParamRef {
  std::string name;
  MatX<S>* value;
  MatX<S>* grad;
};

template <typename S>
struct NetCache;

template <typename S>
struct LayerCache {
  Tensor<S> input;
  std::unique_ptr<NetCache<S>> sub;  // composite layers (residual blocks)
};

template <typename S>
struct NetCache {
  std::vector<LayerCache<S>> layers;
  Tensor<S> output;
};

template <typename S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<S> forward(const Tensor<S>& x, LayerCache<S>& cache) = 0;
  // Returns grad w.r.t. input; accumulates parameter grads iff with_param_grads.
  virtual Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache,
                             bool with_param_grads) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    (void)prefix;
    (void)out;
  }
  virtual std::string kind() const = 0;
};

enum class PadMode { Zero, Reflect };

namespace detail {

// Source pixel index for a (possibly padded) coordinate, or -1 for a zero pad.
inline int pad_src(int r, int c, int h, int w, PadMode mode) {
  if (r >= 0 && r < h && c >= 0 && c < w) return r * w + c;
  if (mode == PadMode::Zero) return -1;
  return reflect_index(r, h) * w + reflect_index(c, w);
}

}  // namespace detail

template <typename S>
class Conv2d final : public Layer<S> {
 public:
  Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, PadMode mode, Rng& rng)
      : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), pad_(pad), mode_(mode) {
    W_.resize(out_ch, in_ch * ksize * ksize);
    for (Eigen::Index i = 0; i < W_.size(); ++i)
      W_.data()[i] = static_cast<S>(0.02 * rng.normal());
    b_ = MatX<S>::Zero(out_ch, 1);
    gW_ = MatX<S>::Zero(W_.rows(), W_.cols());
    gb_ = MatX<S>::Zero(out_ch, 1);
  }

  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>&) override {
    require(x.channels == in_ch_, "Conv2d: channel mismatch, got " + x.shape_str());
    const int oh = (x.height + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (x.width + 2 * pad_ - k_) / stride_ + 1;
    require(oh > 0 && ow > 0, "Conv2d: input too small: " + x.shape_str());
    MatX<S> col = im2col(x, oh, ow);
    Tensor<S> y(out_ch_, oh, ow);
    y.m.noalias() = W_ * col;
    y.m.colwise() += b_.col(0);
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache,
                     bool with_param_grads) override {
    const Tensor<S>& x = cache.input;
    const int oh = gout.height, ow = gout.width;
    if (with_param_grads) {
      MatX<S> col = im2col(x, oh, ow);
      gW_.noalias() += gout.m * col.transpose();
      gb_.col(0) += gout.m.rowwise().sum();
    }
    MatX<S> dcol(in_ch_ * k_ * k_, oh * ow);
    dcol.noalias() = W_.transpose() * gout.m;
    // col2im scatter (pad-aware: reflect pads accumulate into their source)
    Tensor<S> dx(x.channels, x.height, x.width);
    for (int orow = 0; orow < oh; ++orow)
      for (int ocol = 0; ocol < ow; ++ocol) {
        const int p = orow * ow + ocol;
        int row = 0;
        for (int ic = 0; ic < in_ch_; ++ic)
          for (int kr = 0; kr < k_; ++kr)
            for (int kc = 0; kc < k_; ++kc, ++row) {
              const int src = detail::pad_src(orow * stride_ - pad_ + kr,
                                              ocol * stride_ - pad_ + kc, x.height, x.width, mode_);
              if (src >= 0) dx.m(ic, src) += dcol(row, p);
            }
      }
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<S>>& out) override {
    out.push_back({prefix + "/W", &W_, &gW_});
    out.push_back({prefix + "/b", &b_, &gb_});
  }

  std::string kind() const override { return "conv"; }

 private:
  MatX<S> im2col(const Tensor<S>& x, int oh, int ow) const {
    MatX<S> col(in_ch_ * k_ * k_, oh * ow);
    for (int orow = 0; orow < oh; ++orow)
      for (int ocol = 0; ocol < ow; ++ocol) {
        const int p = orow * ow + ocol;
        int row = 0;
        for (int ic = 0; ic < in_ch_; ++ic)
          for (int kr = 0; kr < k_; ++kr)
            for (int kc = 0; kc < k_; ++kc, ++row) {
              const int src = detail::pad_src(orow * stride_ - pad_ + kr,
                                              ocol * stride_ - pad_ + kc, x.height, x.width, mode_);
              col(row, p) = src >= 0 ? x.m(ic, src) : S(0);
            }
      }
    return col;
  }

  int in_ch_, out_ch_, k_, stride_, pad_;
  PadMode mode_;
  MatX<S> W_, b_, gW_, gb_;
};

// Per-channel normalization over spatial positions, no affine parameters.
template <typename S>
class InstanceNorm final : public Layer<S> {
 public:
  explicit InstanceNorm(S eps = S(1e-5)) : eps_(eps) {}

  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>&) override {
    Tensor<S> y(x.channels, x.height, x.width);
    const S n = static_cast<S>(x.pixels());
    for (int c = 0; c < x.channels; ++c) {
      const S mu = x.m.row(c).mean();
      const auto xc = x.m.row(c).array() - mu;
      const S var = xc.square().sum() / n;
      y.m.row(c) = (xc / std::sqrt(var + eps_)).matrix();
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache, bool) override {
    const Tensor<S>& x = cache.input;
    Tensor<S> dx(x.channels, x.height, x.width);
    const S n = static_cast<S>(x.pixels());
    for (int c = 0; c < x.channels; ++c) {
      const S mu = x.m.row(c).mean();
      const auto xc = x.m.row(c).array() - mu;
      const S var = xc.square().sum() / n;
      const S inv = S(1) / std::sqrt(var + eps_);
      const auto yhat = xc * inv;
      const auto g = gout.m.row(c).array();
      const S gmean = g.mean();
      const S gymean = (g * yhat).mean();
      dx.m.row(c) = (inv * (g - gmean - yhat * gymean)).matrix();
    }
    return dx;
  }

  std::string kind() const override { return "instancenorm"; }

 private:
  S eps_;
};

template <typename S>
class ReLU final : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>&) override {
    Tensor<S> y = x;
    y.m = y.m.cwiseMax(S(0));
    return y;
  }
  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache, bool) override {
    Tensor<S> dx = gout;
    dx.m = ((cache.input.m.array() > S(0)).template cast<S>() * gout.m.array()).matrix();
    return dx;
  }
  std::string kind() const override { return "relu"; }
};

template <typename S>
class LeakyReLU final : public Layer<S> {
 public:
  explicit LeakyReLU(S slope = S(0.2)) : slope_(slope) {}
  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>&) override {
    Tensor<S> y = x;
    y.m = x.m.cwiseMax(x.m * slope_);
    return y;
  }
  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache, bool) override {
    Tensor<S> dx = gout;
    dx.m = (cache.input.m.array() > S(0))
               .select(gout.m.array(), gout.m.array() * slope_)
               .matrix();
    return dx;
  }
  std::string kind() const override { return "leakyrelu"; }

 private:
  S slope_;
};

template <typename S>
class Tanh final : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>&) override {
    Tensor<S> y = x;
    y.m = x.m.array().tanh().matrix();
    return y;
  }
  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache, bool) override {
    Tensor<S> dx = gout;
    const auto y = cache.input.m.array().tanh();
    dx.m = (gout.m.array() * (S(1) - y.square())).matrix();
    return dx;
  }
  std::string kind() const override { return "tanh"; }
};

template <typename S>
class Sigmoid final : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>&) override {
    Tensor<S> y = x;
    y.m = (S(1) / (S(1) + (-x.m.array()).exp())).matrix();
    return y;
  }
  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache, bool) override {
    Tensor<S> dx = gout;
    const auto y = S(1) / (S(1) + (-cache.input.m.array()).exp());
    dx.m = (gout.m.array() * y * (S(1) - y)).matrix();
    return dx;
  }
  std::string kind() const override { return "sigmoid"; }
};

// Nearest-neighbour 2x upsampling.
template <typename S>
class Upsample2x final : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>&) override {
    Tensor<S> y(x.channels, 2 * x.height, 2 * x.width);
    for (int r = 0; r < x.height; ++r)
      for (int c = 0; c < x.width; ++c) {
        const auto src = x.m.col(r * x.width + c);
        y.m.col((2 * r) * y.width + 2 * c) = src;
        y.m.col((2 * r) * y.width + 2 * c + 1) = src;
        y.m.col((2 * r + 1) * y.width + 2 * c) = src;
        y.m.col((2 * r + 1) * y.width + 2 * c + 1) = src;
      }
    return y;
  }
  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache, bool) override {
    const Tensor<S>& x = cache.input;
    Tensor<S> dx(x.channels, x.height, x.width);
    for (int r = 0; r < x.height; ++r)
      for (int c = 0; c < x.width; ++c)
        dx.m.col(r * x.width + c) = gout.m.col((2 * r) * gout.width + 2 * c) +
                                    gout.m.col((2 * r) * gout.width + 2 * c + 1) +
                                    gout.m.col((2 * r + 1) * gout.width + 2 * c) +
                                    gout.m.col((2 * r + 1) * gout.width + 2 * c + 1);
    return dx;
  }
  std::string kind() const override { return "upsample2x"; }
};

template <typename S>
class GlobalAvgPool final : public Layer<S> {
 public:
  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>&) override {
    Tensor<S> y(x.channels, 1, 1);
    y.m.col(0) = x.m.rowwise().mean();
    return y;
  }
  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache, bool) override {
    const Tensor<S>& x = cache.input;
    Tensor<S> dx(x.channels, x.height, x.width);
    dx.m = (gout.m.col(0) / static_cast<S>(x.pixels())).replicate(1, x.pixels());
    return dx;
  }
  std::string kind() const override { return "gap"; }
};

// Per-pixel linear map (1x1 convolution); used as the discriminator head on
// pooled 1x1 activations.
template <typename S>
class Linear final : public Layer<S> {
 public:
  Linear(int in_dim, int out_dim, Rng& rng) : in_(in_dim), out_(out_dim) {
    W_.resize(out_dim, in_dim);
    for (Eigen::Index i = 0; i < W_.size(); ++i)
      W_.data()[i] = static_cast<S>(0.02 * rng.normal());
    b_ = MatX<S>::Zero(out_dim, 1);
    gW_ = MatX<S>::Zero(out_dim, in_dim);
    gb_ = MatX<S>::Zero(out_dim, 1);
  }

  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>&) override {
    require(x.channels == in_, "Linear: channel mismatch, got " + x.shape_str());
    Tensor<S> y(out_, x.height, x.width);
    y.m.noalias() = W_ * x.m;
    y.m.colwise() += b_.col(0);
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache,
                     bool with_param_grads) override {
    const Tensor<S>& x = cache.input;
    if (with_param_grads) {
      gW_.noalias() += gout.m * x.m.transpose();
      gb_.col(0) += gout.m.rowwise().sum();
    }
    Tensor<S> dx(x.channels, x.height, x.width);
    dx.m.noalias() = W_.transpose() * gout.m;
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<S>>& out) override {
    out.push_back({prefix + "/W", &W_, &gW_});
    out.push_back({prefix + "/b", &b_, &gb_});
  }

  std::string kind() const override { return "linear"; }

 private:
  int in_, out_;
  MatX<S> W_, b_, gW_, gb_;
};

// Sequential container. Tap gradients are addressed by layer index whose
// output they attach to; index -1 addresses the raw input.
template <typename S>
class Net {
 public:
  std::vector<std::unique_ptr<Layer<S>>> layers;

  Tensor<S> forward(const Tensor<S>& x, NetCache<S>& cache) const {
    cache.layers.clear();
    cache.layers.resize(layers.size());
    Tensor<S> cur = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      cache.layers[i].input = cur;
      cur = layers[i]->forward(cache.layers[i].input, cache.layers[i]);
    }
    cache.output = cur;
    return cur;
  }

  // gout: grad w.r.t. net output (may be zero). tap_grads[i] adds to the grad
  // of layer i's output before backing through layer i. Returns grad w.r.t.
  // the net input (including any tap at -1).
  Tensor<S> backward(const Tensor<S>& gout, const NetCache<S>& cache,
                     const std::map<int, Tensor<S>>& tap_grads, bool with_param_grads) const {
    Tensor<S> g = gout;
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
      const auto it = tap_grads.find(i);
      if (it != tap_grads.end()) {
        require(g.same_shape(it->second), "Net::backward: tap gradient shape mismatch");
        g.m += it->second.m;
      }
      g = layers[static_cast<std::size_t>(i)]->backward(g, cache.layers[static_cast<std::size_t>(i)],
                                                        with_param_grads);
    }
    const auto it = tap_grads.find(-1);
    if (it != tap_grads.end()) g.m += it->second.m;
    return g;
  }

  // Activation at the output of layer idx within a completed forward pass
  // (idx == -1 gives the net input).
  const Tensor<S>& activation(const NetCache<S>& cache, int idx) const {
    if (idx + 1 < static_cast<int>(layers.size()))
      return cache.layers[static_cast<std::size_t>(idx + 1)].input;
    return cache.output;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<S>>& out) const {
    for (std::size_t i = 0; i < layers.size(); ++i)
      layers[i]->collect_params(prefix + "/" + std::to_string(i), out);
  }
};

// y = x + body(x); body is conv-norm-relu-conv-norm.
template <typename S>
class ResidualBlock final : public Layer<S> {
 public:
  ResidualBlock(int width, Rng& rng) {
    body_.layers.push_back(
        std::make_unique<Conv2d<S>>(width, width, 3, 1, 1, PadMode::Reflect, rng));
    body_.layers.push_back(std::make_unique<InstanceNorm<S>>());
    body_.layers.push_back(std::make_unique<ReLU<S>>());
    body_.layers.push_back(
        std::make_unique<Conv2d<S>>(width, width, 3, 1, 1, PadMode::Reflect, rng));
    body_.layers.push_back(std::make_unique<InstanceNorm<S>>());
  }

  Tensor<S> forward(const Tensor<S>& x, LayerCache<S>& cache) override {
    cache.sub = std::make_unique<NetCache<S>>();
    Tensor<S> y = body_.forward(x, *cache.sub);
    y.m += x.m;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gout, const LayerCache<S>& cache,
                     bool with_param_grads) override {
    Tensor<S> dx = body_.backward(gout, *cache.sub, {}, with_param_grads);
    dx.m += gout.m;
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<S>>& out) override {
    body_.collect_params(prefix, out);
  }

  std::string kind() const override { return "resblock"; }

 private:
  Net<S> body_;
};

template <typename S>
long long param_count(const std::vector<ParamRef<S>>& params) {
  long long n = 0;
  for (const auto& p : params) n += p.value->size();
  return n;
}

}  // namespace mango
