#pragma once

// The three learnable networks. The generator is a ResNet encoder/decoder
// with feature taps on the encoder; the projection heads are independent
// two-layer MLPs per tap; the discriminator is a three-conv-layer patch
// critic ending in a sigmoid score. Default widths hit the reference
// parameter budgets (~12M / ~0.7M / ~11M).

#include "mango/config.hpp"
#include "mango/data.hpp"
#include "mango/layers.hpp"

#include <map>
#include <string>
#include <type_traits>
#include <vector>

namespace mango {

// Tap identifiers name encoder stages: "input" (raw pixels), "stem" /
// "down1" / "down2" (after each stage's activation), "mid" (encoder end).
template <typename S>
struct Generator {
  Net<S> encoder;
  Net<S> decoder;
  std::vector<std::string> tap_ids;
  std::vector<int> tap_positions;  // encoder layer index per tap; -1 = input
  std::vector<int> tap_channels;
  int image_size = 0;

  struct FullCache {
    NetCache<S> enc;
    NetCache<S> dec;
  };

  static Generator build(const ExperimentConfig& cfg, Rng& rng) {
    require(cfg.image_size % 4 == 0, "image_size must be divisible by 4 for the generator");
    Generator g;
    g.image_size = cfg.image_size;
    const int w = cfg.g_base_width;
    auto& enc = g.encoder.layers;
    enc.push_back(std::make_unique<Conv2d<S>>(3, w, 7, 1, 3, PadMode::Reflect, rng));
    enc.push_back(std::make_unique<InstanceNorm<S>>());
    enc.push_back(std::make_unique<ReLU<S>>());
    enc.push_back(std::make_unique<Conv2d<S>>(w, 2 * w, 3, 2, 1, PadMode::Zero, rng));
    enc.push_back(std::make_unique<InstanceNorm<S>>());
    enc.push_back(std::make_unique<ReLU<S>>());
    enc.push_back(std::make_unique<Conv2d<S>>(2 * w, 4 * w, 3, 2, 1, PadMode::Zero, rng));
    enc.push_back(std::make_unique<InstanceNorm<S>>());
    enc.push_back(std::make_unique<ReLU<S>>());
    const int enc_blocks = (cfg.g_res_blocks + 1) / 2;
    for (int i = 0; i < enc_blocks; ++i)
      enc.push_back(std::make_unique<ResidualBlock<S>>(4 * w, rng));

    auto& dec = g.decoder.layers;
    for (int i = 0; i < cfg.g_res_blocks - enc_blocks; ++i)
      dec.push_back(std::make_unique<ResidualBlock<S>>(4 * w, rng));
    dec.push_back(std::make_unique<Upsample2x<S>>());
    dec.push_back(std::make_unique<Conv2d<S>>(4 * w, 2 * w, 3, 1, 1, PadMode::Zero, rng));
    dec.push_back(std::make_unique<InstanceNorm<S>>());
    dec.push_back(std::make_unique<ReLU<S>>());
    dec.push_back(std::make_unique<Upsample2x<S>>());
    dec.push_back(std::make_unique<Conv2d<S>>(2 * w, w, 3, 1, 1, PadMode::Zero, rng));
    dec.push_back(std::make_unique<InstanceNorm<S>>());
    dec.push_back(std::make_unique<ReLU<S>>());
    dec.push_back(std::make_unique<Conv2d<S>>(w, 3, 7, 1, 3, PadMode::Reflect, rng));
    dec.push_back(std::make_unique<Tanh<S>>());

    const std::map<std::string, std::pair<int, int>> stages = {
        {"input", {-1, 3}},
        {"stem", {2, w}},
        {"down1", {5, 2 * w}},
        {"down2", {8, 4 * w}},
        {"mid", {8 + enc_blocks, 4 * w}},
    };
    for (const auto& id : cfg.tap_layers) {
      const auto it = stages.find(id);
      require(it != stages.end(), "unknown tap layer id: " + id);
      g.tap_ids.push_back(id);
      g.tap_positions.push_back(it->second.first);
      g.tap_channels.push_back(it->second.second);
    }
    return g;
  }

  // Full translation pass; taps are readable from cache.enc afterwards.
  Tensor<S> forward(const Tensor<S>& x, FullCache& cache) const {
    require(x.channels == 3 && x.height == image_size && x.width == image_size,
            "generator: input must be 3x" + std::to_string(image_size) + "x" +
                std::to_string(image_size) + ", got " + x.shape_str());
    Tensor<S> mid = encoder.forward(x, cache.enc);
    return decoder.forward(mid, cache.dec);
  }

  // Encoder-only pass (feature re-extraction for translated images).
  Tensor<S> encode(const Tensor<S>& x, NetCache<S>& cache) const {
    require(x.channels == 3 && x.height == image_size && x.width == image_size,
            "generator: input must be 3x" + std::to_string(image_size) + "x" +
                std::to_string(image_size) + ", got " + x.shape_str());
    return encoder.forward(x, cache);
  }

  const Tensor<S>& tap_activation(const NetCache<S>& enc_cache, int tap) const {
    return encoder.activation(enc_cache, tap_positions[static_cast<std::size_t>(tap)]);
  }

  // Backward through decoder then encoder with tap gradients; accumulates
  // parameter grads, returns grad w.r.t. the input image.
  Tensor<S> backward(const Tensor<S>& d_output, const FullCache& cache,
                     const std::map<int, Tensor<S>>& enc_tap_grads, bool with_param_grads) const {
    Tensor<S> d_mid = decoder.backward(d_output, cache.dec, {}, with_param_grads);
    return encoder.backward(d_mid, cache.enc, enc_tap_grads, with_param_grads);
  }

  // Backward for an encoder-only pass driven purely by tap gradients.
  Tensor<S> backward_encode(const NetCache<S>& enc_cache,
                            const std::map<int, Tensor<S>>& enc_tap_grads,
                            bool with_param_grads) const {
    Tensor<S> zero = enc_cache.output;
    zero.m.setZero();
    return encoder.backward(zero, enc_cache, enc_tap_grads, with_param_grads);
  }

  void collect_params(std::vector<ParamRef<S>>& out) const {
    encoder.collect_params("G/enc", out);
    decoder.collect_params("G/dec", out);
  }
};

// Feature rows in, embedding rows out (Eq. 3's H_l); embeddings are NOT
// normalized here — normalization belongs to the scoring function.
template <typename S>
struct ProjectionHeads {
  struct Head {
    MatX<S> W1, b1, W2, b2;
    MatX<S> gW1, gb1, gW2, gb2;
    int in_dim = 0;
  };
  std::vector<Head> heads;
  int embed_dim = 0;

  struct Cache {
    MatX<S> X;  // inputs (N x in_dim)
    MatX<S> Z1; // pre-activation hidden (N x hidden)
  };

  static ProjectionHeads build(const ExperimentConfig& cfg, const std::vector<int>& tap_dims,
                               Rng& rng) {
    ProjectionHeads h;
    h.embed_dim = cfg.embed_dim;
    for (int d : tap_dims) {
      Head head;
      head.in_dim = d;
      head.W1.resize(cfg.head_hidden, d);
      head.W2.resize(cfg.embed_dim, cfg.head_hidden);
      for (Eigen::Index i = 0; i < head.W1.size(); ++i)
        head.W1.data()[i] = static_cast<S>(0.02 * rng.normal());
      for (Eigen::Index i = 0; i < head.W2.size(); ++i)
        head.W2.data()[i] = static_cast<S>(0.02 * rng.normal());
      head.b1 = MatX<S>::Zero(cfg.head_hidden, 1);
      head.b2 = MatX<S>::Zero(cfg.embed_dim, 1);
      head.gW1 = MatX<S>::Zero(head.W1.rows(), head.W1.cols());
      head.gW2 = MatX<S>::Zero(head.W2.rows(), head.W2.cols());
      head.gb1 = MatX<S>::Zero(cfg.head_hidden, 1);
      head.gb2 = MatX<S>::Zero(cfg.embed_dim, 1);
      h.heads.push_back(std::move(head));
    }
    return h;
  }

  int layer_count() const { return static_cast<int>(heads.size()); }

  // X: one feature vector per row.
  MatX<S> forward(int l, const MatX<S>& X, Cache& cache) const {
    const Head& h = heads.at(static_cast<std::size_t>(l));
    require(X.cols() == h.in_dim, "projection head " + std::to_string(l) +
                                      ": feature dim mismatch, got " + std::to_string(X.cols()) +
                                      " want " + std::to_string(h.in_dim));
    cache.X = X;
    cache.Z1.noalias() = X * h.W1.transpose();
    cache.Z1.rowwise() += h.b1.col(0).transpose();
    MatX<S> A = cache.Z1.cwiseMax(S(0));
    MatX<S> Y;
    Y.noalias() = A * h.W2.transpose();
    Y.rowwise() += h.b2.col(0).transpose();
    return Y;
  }

  // Accumulates head grads, returns grad w.r.t. X.
  MatX<S> backward(int l, const MatX<S>& dY, const Cache& cache) {
    Head& h = heads.at(static_cast<std::size_t>(l));
    const MatX<S> A = cache.Z1.cwiseMax(S(0));
    h.gW2.noalias() += dY.transpose() * A;
    h.gb2.col(0) += dY.colwise().sum().transpose();
    MatX<S> dA;
    dA.noalias() = dY * h.W2;
    MatX<S> dZ1 = ((cache.Z1.array() > S(0)).template cast<S>() * dA.array()).matrix();
    h.gW1.noalias() += dZ1.transpose() * cache.X;
    h.gb1.col(0) += dZ1.colwise().sum().transpose();
    MatX<S> dX;
    dX.noalias() = dZ1 * h.W1;
    return dX;
  }

  void collect_params(std::vector<ParamRef<S>>& out) {
    for (std::size_t l = 0; l < heads.size(); ++l) {
      const std::string p = "H/" + std::to_string(l);
      out.push_back({p + "/W1", &heads[l].W1, &heads[l].gW1});
      out.push_back({p + "/b1", &heads[l].b1, &heads[l].gb1});
      out.push_back({p + "/W2", &heads[l].W2, &heads[l].gW2});
      out.push_back({p + "/b2", &heads[l].b2, &heads[l].gb2});
    }
  }
};

// Three stride-2 convolutions, global average pool, linear head, sigmoid.
// Receives patches only; there is no full-image entry point.
template <typename S>
struct Discriminator {
  Net<S> net;
  int patch_size = 0;

  static Discriminator build(const ExperimentConfig& cfg, Rng& rng) {
    require(cfg.patch_size >= 8, "patch_size must be >= 8 for the discriminator");
    Discriminator d;
    d.patch_size = cfg.patch_size;
    const int c = cfg.d_base_width;
    auto& L = d.net.layers;
    L.push_back(std::make_unique<Conv2d<S>>(3, c, 4, 2, 1, PadMode::Zero, rng));
    L.push_back(std::make_unique<LeakyReLU<S>>(S(0.2)));
    L.push_back(std::make_unique<Conv2d<S>>(c, 2 * c, 4, 2, 1, PadMode::Zero, rng));
    L.push_back(std::make_unique<InstanceNorm<S>>());
    L.push_back(std::make_unique<LeakyReLU<S>>(S(0.2)));
    L.push_back(std::make_unique<Conv2d<S>>(2 * c, 4 * c, 4, 2, 1, PadMode::Zero, rng));
    L.push_back(std::make_unique<InstanceNorm<S>>());
    L.push_back(std::make_unique<LeakyReLU<S>>(S(0.2)));
    L.push_back(std::make_unique<GlobalAvgPool<S>>());
    L.push_back(std::make_unique<Linear<S>>(4 * c, 1, rng));
    L.push_back(std::make_unique<Sigmoid<S>>());
    return d;
  }

  // One score per patch, strictly inside (0,1) by construction.
  S score(const Tensor<S>& patch, NetCache<S>& cache) const {
    require(patch.channels == 3 && patch.height == patch_size && patch.width == patch_size,
            "discriminator: wrong patch size, got " + patch.shape_str() + " want 3x" +
                std::to_string(patch_size) + "x" + std::to_string(patch_size));
    return net.forward(patch, cache).m(0, 0);
  }

  // d_score -> grad w.r.t. the patch pixels.
  Tensor<S> backward(S d_score, const NetCache<S>& cache, bool with_param_grads) const {
    Tensor<S> g(1, 1, 1);
    g.m(0, 0) = d_score;
    return net.backward(g, cache, {}, with_param_grads);
  }

  void collect_params(std::vector<ParamRef<S>>& out) const { net.collect_params("D/net", out); }
};

// Scores every patch in a batch (separate caches per patch).
template <typename S>
VecX<S> discriminate(const Discriminator<S>& d, const PatchBatch& batch,
                     std::vector<NetCache<S>>& caches) {
  caches.clear();
  caches.resize(batch.patches.size());
  VecX<S> scores(static_cast<Eigen::Index>(batch.patches.size()));
  for (std::size_t i = 0; i < batch.patches.size(); ++i) {
    if constexpr (std::is_same_v<S, float>) {
      scores(static_cast<Eigen::Index>(i)) = d.score(batch.patches[i].data, caches[i]);
    } else {
      scores(static_cast<Eigen::Index>(i)) =
          d.score(batch.patches[i].data.template cast<S>(), caches[i]);
    }
  }
  return scores;
}

}  // namespace mango
