#include "mango/trainer.hpp"

#include "mango/diagnostics.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

namespace mango {

namespace fs = std::filesystem;
using nlohmann::json;

// --- Adam ---------------------------------------------------------------------

Adam::Adam(std::vector<ParamRef<float>> params, double lr, double beta1, double beta2)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2) {
  for (const auto& p : params_) {
    m_.push_back(Eigen::MatrixXf::Zero(p.value->rows(), p.value->cols()));
    v_.push_back(Eigen::MatrixXf::Zero(p.value->rows(), p.value->cols()));
  }
}

void Adam::zero_grads() {
  for (auto& p : params_) p.grad->setZero();
}

void Adam::step(double lr_scale) {
  ++t_;
  const float b1 = static_cast<float>(beta1_);
  const float b2 = static_cast<float>(beta2_);
  const float bc1 = static_cast<float>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const float bc2 = static_cast<float>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  const float lr = static_cast<float>(lr_ * lr_scale);
  const float eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Eigen::MatrixXf& g = *params_[i].grad;
    m_[i] = b1 * m_[i] + (1.0f - b1) * g;
    v_[i] = (b2 * v_[i].array() + (1.0f - b2) * g.array().square()).matrix();
    params_[i].value->array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
  }
}

// --- RunningWindow --------------------------------------------------------------

void RunningWindow::push(double v) {
  buf_[static_cast<std::size_t>(pos_)] = v;
  pos_ = (pos_ + 1) % static_cast<int>(buf_.size());
  if (count_ < static_cast<int>(buf_.size())) ++count_;
}

double RunningWindow::mean() const {
  if (count_ == 0) return 0.0;
  double s = 0.0;
  for (int i = 0; i < count_; ++i) s += buf_[static_cast<std::size_t>(i)];
  return s / count_;
}

std::vector<double> RunningWindow::serialize() const {
  std::vector<double> out;
  out.push_back(static_cast<double>(buf_.size()));
  out.push_back(static_cast<double>(pos_));
  out.push_back(static_cast<double>(count_));
  out.insert(out.end(), buf_.begin(), buf_.end());
  return out;
}

RunningWindow RunningWindow::deserialize(const std::vector<double>& data) {
  if (data.size() < 3) throw std::runtime_error("corrupt checkpoint: running-window array");
  const int cap = static_cast<int>(data[0]);
  if (cap <= 0 || data.size() != static_cast<std::size_t>(cap) + 3)
    throw std::runtime_error("corrupt checkpoint: running-window array");
  RunningWindow w(cap);
  w.pos_ = static_cast<int>(data[1]);
  w.count_ = static_cast<int>(data[2]);
  for (int i = 0; i < cap; ++i) w.buf_[static_cast<std::size_t>(i)] = data[static_cast<std::size_t>(i) + 3];
  return w;
}

// --- Trainer ---------------------------------------------------------------------

Trainer::Trainer(const ExperimentConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  build_networks(Rng::stream(static_cast<std::uint64_t>(cfg_.seed), rng_stream::kWeightInit));
  rng_train_ = Rng::stream(static_cast<std::uint64_t>(cfg_.seed), rng_stream::kBatch);
}

void Trainer::build_networks(Rng init_rng) {
  G_ = Generator<float>::build(cfg_, init_rng);
  H_ = ProjectionHeads<float>::build(cfg_, G_.tap_channels, init_rng);
  D_ = Discriminator<float>::build(cfg_, init_rng);
  std::vector<ParamRef<float>> pg;
  G_.collect_params(pg);
  H_.collect_params(pg);
  std::vector<ParamRef<float>> pd;
  D_.collect_params(pd);
  opt_g_ = Adam(std::move(pg), cfg_.learning_rate, cfg_.beta1, cfg_.beta2);
  opt_d_ = Adam(std::move(pd), cfg_.learning_rate, cfg_.beta1, cfg_.beta2);
}

namespace {

// Feature rows gathered from a CHW tensor at flat spatial indices.
MatX<float> gather_features(const Tensor<float>& t, const std::vector<int>& idx) {
  MatX<float> out(static_cast<Eigen::Index>(idx.size()), t.channels);
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) = t.m.col(idx[k]).transpose();
  return out;
}

void scatter_features(const MatX<float>& grad, const std::vector<int>& idx, Tensor<float>& gt) {
  for (std::size_t k = 0; k < idx.size(); ++k)
    gt.m.col(idx[k]) += grad.row(static_cast<Eigen::Index>(k)).transpose();
}

void add_tap_grad(std::map<int, Tensor<float>>& taps, int pos, const Tensor<float>& shape_like,
                  const MatX<float>& grad, const std::vector<int>& idx) {
  auto it = taps.find(pos);
  if (it == taps.end()) {
    Tensor<float> zero(shape_like.channels, shape_like.height, shape_like.width);
    it = taps.emplace(pos, std::move(zero)).first;
  }
  scatter_features(grad, idx, it->second);
}

}  // namespace

StepMetrics Trainer::train_step(const DomainDataset& ds_a, const DomainDataset& ds_b) {
  const auto t0 = std::chrono::steady_clock::now();
  const long long this_step = step_ + 1;

  double lr_scale = 1.0;
  if (cfg_.lr_decay && cfg_.total_steps > 1) {
    const double half = static_cast<double>(cfg_.total_steps) / 2.0;
    const double s = static_cast<double>(this_step);
    if (s > half)
      lr_scale = std::max(0.0, (static_cast<double>(cfg_.total_steps) - s) /
                                   (static_cast<double>(cfg_.total_steps) - half));
  }

  UnpairedBatch batch = sample_unpaired_batch(ds_a, ds_b, cfg_.batch_size, rng_train_);
  const int bs = cfg_.batch_size;
  const double inv_bs = 1.0 / bs;
  const bool right_angle = cfg_.right_angle_rotations();
  const int L = static_cast<int>(G_.tap_positions.size());

  // Forward translation passes are shared between the D phase (detached) and
  // the G phase (backpropagated).
  std::vector<Generator<float>::FullCache> cache_ga(static_cast<std::size_t>(bs));
  std::vector<ImageF> fake_a(static_cast<std::size_t>(bs));
  for (int k = 0; k < bs; ++k)
    fake_a[static_cast<std::size_t>(k)] =
        G_.forward(batch.a[static_cast<std::size_t>(k)]->image,
                   cache_ga[static_cast<std::size_t>(k)]);

  // ---- discriminator update(s): minimize -L_GAN on real-B vs detached fakes
  double d_real_mean = 0.0, d_fake_mean = 0.0;
  VecX<float> last_real_scores;
  for (int sub = 0; sub < cfg_.d_steps_per_g; ++sub) {
    opt_d_.zero_grads();
    d_real_mean = d_fake_mean = 0.0;
    VecX<float> all_real;
    for (int k = 0; k < bs; ++k) {
      PatchBatch pr = extract_patches({&batch.b[static_cast<std::size_t>(k)]->image}, cfg_, rng_train_);
      PatchBatch pf = extract_patches({&fake_a[static_cast<std::size_t>(k)]}, cfg_, rng_train_);
      std::vector<NetCache<float>> caches_r, caches_f;
      VecX<float> sr = discriminate(D_, pr, caches_r);
      VecX<float> sf = discriminate(D_, pf, caches_f);
      GanLossResult<float> g = gan_loss(sr, sf);
      // L_D = -L_GAN
      for (Eigen::Index i = 0; i < sr.size(); ++i)
        D_.backward(static_cast<float>(-inv_bs) * g.d_real(i), caches_r[static_cast<std::size_t>(i)], true);
      for (Eigen::Index i = 0; i < sf.size(); ++i)
        D_.backward(static_cast<float>(-inv_bs) * g.d_fake(i), caches_f[static_cast<std::size_t>(i)], true);
      d_real_mean += inv_bs * g.mean_real;
      d_fake_mean += inv_bs * g.mean_fake;
      if (k == 0)
        all_real = sr;
      else {
        VecX<float> merged(all_real.size() + sr.size());
        merged << all_real, sr;
        all_real = merged;
      }
    }
    opt_d_.step(lr_scale);
    last_real_scores = all_real;
  }

  // ---- generator + heads update: minimize Eq. 8
  opt_g_.zero_grads();
  double val_pa = 0.0, val_pb = 0.0, val_seg = 0.0, val_gan = 0.0;
  last_indices_a_.assign(static_cast<std::size_t>(L), {});

  const float tau = static_cast<float>(cfg_.tau);
  const float alpha = static_cast<float>(cfg_.alpha);
  const float theta = static_cast<float>(cfg_.theta);

  // Last image's embeddings, kept for the diagnostic dump written when a
  // loss goes non-finite.
  std::vector<MatX<float>> dump_Z, dump_Zhat;
  std::vector<std::vector<int>> dump_labels;
  VecX<float> dump_fake_scores;

  for (int k = 0; k < bs; ++k) {
    const DatasetItem& item_a = *batch.a[static_cast<std::size_t>(k)];
    const DatasetItem& item_b = *batch.b[static_cast<std::size_t>(k)];
    Generator<float>::FullCache& ga = cache_ga[static_cast<std::size_t>(k)];

    NetCache<float> enc_a2;
    G_.encode(fake_a[static_cast<std::size_t>(k)], enc_a2);
    Generator<float>::FullCache gb;
    ImageF fake_b = G_.forward(item_b.image, gb);
    NetCache<float> enc_b2;
    G_.encode(fake_b, enc_b2);

    // --- feature sampling (pinned order: A indices, B indices, SegNCE extra)
    std::vector<std::vector<int>> idx_a(static_cast<std::size_t>(L)), idx_b(static_cast<std::size_t>(L)),
        idx_s(static_cast<std::size_t>(L));
    std::vector<MatX<float>> VA, VAh, VB, VBh, VS;
    std::vector<ProjectionHeads<float>::Cache> hc_a(static_cast<std::size_t>(L)),
        hc_ah(static_cast<std::size_t>(L)), hc_b(static_cast<std::size_t>(L)),
        hc_bh(static_cast<std::size_t>(L)), hc_s(static_cast<std::size_t>(L));
    std::vector<std::vector<int>> labels(static_cast<std::size_t>(L));

    for (int l = 0; l < L; ++l) {
      const Tensor<float>& tap_a = G_.tap_activation(ga.enc, l);
      const Tensor<float>& tap_ah = G_.tap_activation(enc_a2, l);
      require(cfg_.num_features_per_layer <= tap_a.pixels(),
              "num_features_per_layer exceeds feature map size at tap " + G_.tap_ids[static_cast<std::size_t>(l)]);
      idx_a[static_cast<std::size_t>(l)] =
          sample_feature_indices(tap_a.height, tap_a.width, cfg_.num_features_per_layer, rng_train_);
      VA.push_back(H_.forward(l, gather_features(tap_a, idx_a[static_cast<std::size_t>(l)]),
                              hc_a[static_cast<std::size_t>(l)]));
      VAh.push_back(H_.forward(l, gather_features(tap_ah, idx_a[static_cast<std::size_t>(l)]),
                               hc_ah[static_cast<std::size_t>(l)]));
    }
    for (int l = 0; l < L; ++l) {
      const Tensor<float>& tap_b = G_.tap_activation(gb.enc, l);
      const Tensor<float>& tap_bh = G_.tap_activation(enc_b2, l);
      idx_b[static_cast<std::size_t>(l)] =
          sample_feature_indices(tap_b.height, tap_b.width, cfg_.num_features_per_layer, rng_train_);
      VB.push_back(H_.forward(l, gather_features(tap_b, idx_b[static_cast<std::size_t>(l)]),
                              hc_b[static_cast<std::size_t>(l)]));
      VBh.push_back(H_.forward(l, gather_features(tap_bh, idx_b[static_cast<std::size_t>(l)]),
                               hc_bh[static_cast<std::size_t>(l)]));
    }
    for (int l = 0; l < L; ++l) {
      const Tensor<float>& tap_a = G_.tap_activation(ga.enc, l);
      if (cfg_.segnce_features_per_layer == cfg_.num_features_per_layer) {
        idx_s[static_cast<std::size_t>(l)] = idx_a[static_cast<std::size_t>(l)];
      } else {
        require(cfg_.segnce_features_per_layer <= tap_a.pixels(),
                "segnce_features_per_layer exceeds feature map size at tap " +
                    G_.tap_ids[static_cast<std::size_t>(l)]);
        idx_s[static_cast<std::size_t>(l)] = sample_feature_indices(
            tap_a.height, tap_a.width, cfg_.segnce_features_per_layer, rng_train_);
      }
      VS.push_back(H_.forward(l, gather_features(tap_a, idx_s[static_cast<std::size_t>(l)]),
                              hc_s[static_cast<std::size_t>(l)]));
      const SegMap down = downsample_segmentation(item_a.seg, tap_a.height, tap_a.width);
      for (int idx : idx_s[static_cast<std::size_t>(l)])
        labels[static_cast<std::size_t>(l)].push_back(down(idx / tap_a.width, idx % tap_a.width));
    }
    last_indices_a_ = idx_a;

    // --- loss values + embedding gradients
    PatchNceResult<float> pa = patchnce_loss(VA, VAh, tau, true, alpha, theta);
    PatchNceResult<float> pb = patchnce_loss(VB, VBh, tau, true, alpha, theta);
    SegNceResult<float> sg =
        segnce_loss(VS, labels, tau, cfg_.include_self_in_segnce_denominator);

    PatchBatch pg = extract_patches({&fake_a[static_cast<std::size_t>(k)]}, cfg_, rng_train_);
    std::vector<NetCache<float>> caches_g;
    VecX<float> sg_scores = discriminate(D_, pg, caches_g);
    GanLossResult<float> gan_g = gan_loss(last_real_scores, sg_scores);

    val_pa += inv_bs * pa.value;
    val_pb += inv_bs * pb.value;
    val_seg += inv_bs * sg.value;
    val_gan += inv_bs * gan_g.value;

    dump_Z = VA;
    dump_Zhat = VAh;
    dump_labels = cfg_.segnce_features_per_layer == cfg_.num_features_per_layer
                      ? labels
                      : std::vector<std::vector<int>>{};
    dump_fake_scores = sg_scores;

    // --- backward: heads first (accumulating head grads), taps into encoders
    std::map<int, Tensor<float>> taps_a, taps_a2, taps_b, taps_b2;
    for (int l = 0; l < L; ++l) {
      const int pos = G_.tap_positions[static_cast<std::size_t>(l)];
      const Tensor<float>& tap_a = G_.tap_activation(ga.enc, l);
      if (cfg_.w_patchnce_A > 0) {
        const float w = static_cast<float>(cfg_.w_patchnce_A * inv_bs);
        add_tap_grad(taps_a, pos, tap_a,
                     H_.backward(l, (w * pa.dV[static_cast<std::size_t>(l)].array()).matrix(),
                                 hc_a[static_cast<std::size_t>(l)]),
                     idx_a[static_cast<std::size_t>(l)]);
        add_tap_grad(taps_a2, pos, tap_a,
                     H_.backward(l, (w * pa.dVhat[static_cast<std::size_t>(l)].array()).matrix(),
                                 hc_ah[static_cast<std::size_t>(l)]),
                     idx_a[static_cast<std::size_t>(l)]);
      }
      if (cfg_.w_segnce > 0) {
        const float w = static_cast<float>(cfg_.w_segnce * inv_bs);
        add_tap_grad(taps_a, pos, tap_a,
                     H_.backward(l, (w * sg.dZ[static_cast<std::size_t>(l)].array()).matrix(),
                                 hc_s[static_cast<std::size_t>(l)]),
                     idx_s[static_cast<std::size_t>(l)]);
      }
      if (cfg_.w_patchnce_idB > 0) {
        const float w = static_cast<float>(cfg_.w_patchnce_idB * inv_bs);
        const Tensor<float>& tap_b = G_.tap_activation(gb.enc, l);
        add_tap_grad(taps_b, pos, tap_b,
                     H_.backward(l, (w * pb.dV[static_cast<std::size_t>(l)].array()).matrix(),
                                 hc_b[static_cast<std::size_t>(l)]),
                     idx_b[static_cast<std::size_t>(l)]);
        add_tap_grad(taps_b2, pos, tap_b,
                     H_.backward(l, (w * pb.dVhat[static_cast<std::size_t>(l)].array()).matrix(),
                                 hc_bh[static_cast<std::size_t>(l)]),
                     idx_b[static_cast<std::size_t>(l)]);
      }
    }

    // GAN gradient into the translated image (D params frozen here).
    ImageF d_fake(3, cfg_.image_size, cfg_.image_size);
    bool have_dfake = false;
    if (cfg_.w_gan > 0) {
      for (std::size_t i = 0; i < pg.patches.size(); ++i) {
        const float ds = static_cast<float>(cfg_.w_gan * inv_bs) *
                         gan_g.d_fake(static_cast<Eigen::Index>(i));
        if (ds == 0.0f) continue;
        Tensor<float> dp = D_.backward(ds, caches_g[i], false);
        scatter_patch_gradient(dp, pg.patches[i], right_angle, d_fake);
        have_dfake = true;
      }
    }

    // Re-encoding pass backward adds its input gradient to the fake image.
    if (!taps_a2.empty()) {
      Tensor<float> g2 = G_.backward_encode(enc_a2, taps_a2, true);
      d_fake.m += g2.m;
      have_dfake = true;
    }
    if (have_dfake || !taps_a.empty()) G_.backward(d_fake, ga, taps_a, true);

    if (!taps_b2.empty() || !taps_b.empty()) {
      Tensor<float> d_fake_b(3, cfg_.image_size, cfg_.image_size);
      if (!taps_b2.empty()) d_fake_b.m += G_.backward_encode(enc_b2, taps_b2, true).m;
      G_.backward(d_fake_b, gb, taps_b, true);
    }
  }
  opt_g_.step(lr_scale);

  StepMetrics m;
  m.step = this_step;
  const LossWeights weights{cfg_.w_patchnce_A, cfg_.w_patchnce_idB, cfg_.w_segnce, cfg_.w_gan};
  try {
    m.report = total_losses(val_pa, val_pb, val_seg, val_gan, weights);
  } catch (const std::exception&) {
    if (!diagnostic_dir_.empty() && !dump_Z.empty()) {
      FeatureDump dump;
      dump.tau = cfg_.tau;
      dump.alpha = cfg_.alpha;
      dump.theta = cfg_.theta;
      dump.weights = weights;
      dump.include_self = cfg_.include_self_in_segnce_denominator;
      for (const auto& z : dump_Z) dump.Z.push_back(z.cast<double>());
      for (const auto& z : dump_Zhat) dump.Zhat.push_back(z.cast<double>());
      dump.labels = dump_labels;
      dump.real_scores = last_real_scores.cast<double>();
      dump.fake_scores = dump_fake_scores.cast<double>();
      const std::string dump_path = diagnostic_dir_ + "/nonfinite_step_" +
                                    std::to_string(this_step) + ".dump";
      write_feature_dump(dump_path, dump);
      std::cerr << "diagnostic feature dump written to " << dump_path << "\n";
    }
    throw;
  }
  m.d_real = d_real_mean;
  m.d_fake = d_fake_mean;
  step_ = this_step;
  avg_idB_.push(m.report.patchnce_idB);
  avg_total_g_.push(m.report.total_G);
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

std::string Trainer::metrics_json_line(const StepMetrics& m) {
  json j;
  j["step"] = m.step;
  j["patchnce_A"] = m.report.patchnce_A;
  j["patchnce_idB"] = m.report.patchnce_idB;
  j["segnce"] = m.report.segnce;
  j["gan_G"] = m.report.gan_G;
  j["gan_D"] = m.report.gan_D;
  j["total_G"] = m.report.total_G;
  j["total_D"] = m.report.total_D;
  j["d_real"] = m.d_real;
  j["d_fake"] = m.d_fake;
  return j.dump();
}

TrainResult Trainer::train(const DomainDataset& ds_a, const DomainDataset& ds_b,
                           const std::string& out_dir,
                           const std::function<void(const StepMetrics&)>& on_step) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + out_dir);
  diagnostic_dir_ = out_dir;

  save_config((fs::path(out_dir) / "config.json").string(), cfg_);
  const std::string metrics_path = (fs::path(out_dir) / "metrics.jsonl").string();
  std::ofstream metrics(metrics_path, std::ios::app);
  if (!metrics) throw std::runtime_error("cannot open metric log: " + metrics_path);
  const std::string timing_path = (fs::path(out_dir) / "timing.jsonl").string();
  std::ofstream timing(timing_path, std::ios::app);

  std::string last_ckpt;
  while (step_ < cfg_.total_steps) {
    StepMetrics m = train_step(ds_a, ds_b);
    metrics << metrics_json_line(m) << '\n';
    metrics.flush();
    if (!metrics) throw std::runtime_error("failed writing metric log: " + metrics_path);
    timing << "{\"step\":" << m.step << ",\"wall_ms\":" << m.wall_ms << "}\n";
    timing.flush();
    if (on_step) on_step(m);
    if ((cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0) ||
        step_ == cfg_.total_steps) {
      char name[64];
      std::snprintf(name, sizeof name, "ckpt_%08lld.bin", static_cast<long long>(step_));
      last_ckpt = (fs::path(out_dir) / name).string();
      save_checkpoint(last_ckpt);
    }
  }
  if (last_ckpt.empty()) {
    last_ckpt = (fs::path(out_dir) / "ckpt_00000000.bin").string();
    save_checkpoint(last_ckpt);
  }
  const std::string final_path = (fs::path(out_dir) / "ckpt_final.bin").string();
  save_checkpoint(final_path);
  return TrainResult{final_path, metrics_path, step_};
}

// --- checkpointing -----------------------------------------------------------------

CheckpointData Trainer::to_checkpoint() const {
  CheckpointData data;
  data.config_json = cfg_.to_json_string();
  data.step = step_;
  data.rng_state = rng_train_.serialize();

  auto add_opt = [&data](const char* tag, const Adam& opt) {
    const auto& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      data.tensors.emplace_back(params[i].name, *params[i].value);
      data.tensors.emplace_back(std::string(tag) + "/m/" + params[i].name, opt.moment_m(i));
      data.tensors.emplace_back(std::string(tag) + "/v/" + params[i].name, opt.moment_v(i));
    }
    data.arrays.emplace_back(std::string(tag) + "/t",
                             std::vector<double>{static_cast<double>(opt.t())});
  };
  add_opt("optG", opt_g_);
  add_opt("optD", opt_d_);
  data.arrays.emplace_back("avg/patchnce_idB", avg_idB_.serialize());
  data.arrays.emplace_back("avg/total_G", avg_total_g_.serialize());
  return data;
}

void Trainer::save_checkpoint(const std::string& path) const {
  write_checkpoint(path, to_checkpoint());
}

void Trainer::restore(const CheckpointData& data) {
  step_ = data.step;
  rng_train_ = Rng::deserialize(data.rng_state);

  std::map<std::string, const Eigen::MatrixXf*> by_name;
  for (const auto& [name, t] : data.tensors) by_name[name] = &t;
  auto fill = [&by_name](const char* tag, Adam& opt) {
    const auto& params = opt.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto assign = [&by_name](const std::string& name, Eigen::MatrixXf& dst) {
        const auto it = by_name.find(name);
        if (it == by_name.end())
          throw std::runtime_error("corrupt checkpoint: missing tensor " + name);
        if (it->second->rows() != dst.rows() || it->second->cols() != dst.cols())
          throw std::runtime_error("corrupt checkpoint: shape mismatch for " + name);
        dst = *it->second;
      };
      assign(params[i].name, *params[i].value);
      assign(std::string(tag) + "/m/" + params[i].name, opt.moment_m(i));
      assign(std::string(tag) + "/v/" + params[i].name, opt.moment_v(i));
    }
  };
  fill("optG", opt_g_);
  fill("optD", opt_d_);

  std::map<std::string, const std::vector<double>*> arrays;
  for (const auto& [name, a] : data.arrays) arrays[name] = &a;
  const auto need = [&arrays](const std::string& name) -> const std::vector<double>& {
    const auto it = arrays.find(name);
    if (it == arrays.end()) throw std::runtime_error("corrupt checkpoint: missing array " + name);
    return *it->second;
  };
  opt_g_.set_t(static_cast<long long>(need("optG/t").at(0)));
  opt_d_.set_t(static_cast<long long>(need("optD/t").at(0)));
  avg_idB_ = RunningWindow::deserialize(need("avg/patchnce_idB"));
  avg_total_g_ = RunningWindow::deserialize(need("avg/total_G"));
}

Trainer Trainer::resume(const std::string& checkpoint_path) {
  CheckpointData data = read_checkpoint(checkpoint_path);
  ExperimentConfig cfg;
  try {
    cfg = parse_config(data.config_json);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("corrupt checkpoint: bad config snapshot: ") + e.what());
  }
  Trainer t(cfg);
  t.restore(data);
  return t;
}

}  // namespace mango
