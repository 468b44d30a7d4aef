#pragma once

// Adversarial training loop: per step one (or more) discriminator updates on
// real-B vs detached-fake patches, then one generator+heads update combining
// modified PatchNCE on A, identity PatchNCE on B, SegNCE on input-image
// features, and the GAN term through freshly drawn patches. All randomness
// flows from a single serialized stream in a pinned order, so checkpoint
// resume is step-identical.

#include "mango/checkpoint.hpp"
#include "mango/config.hpp"
#include "mango/data.hpp"
#include "mango/losses.hpp"
#include "mango/nets.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mango {

// Adam with bias correction; moments keyed by parameter name for checkpoints.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ParamRef<float>> params, double lr, double beta1, double beta2);

  void zero_grads();
  void step(double lr_scale = 1.0);

  long long t() const { return t_; }
  void set_t(long long t) { t_ = t; }
  const std::vector<ParamRef<float>>& params() const { return params_; }
  Eigen::MatrixXf& moment_m(std::size_t i) { return m_[i]; }
  Eigen::MatrixXf& moment_v(std::size_t i) { return v_[i]; }
  const Eigen::MatrixXf& moment_m(std::size_t i) const { return m_[i]; }
  const Eigen::MatrixXf& moment_v(std::size_t i) const { return v_[i]; }

 private:
  std::vector<ParamRef<float>> params_;
  std::vector<Eigen::MatrixXf> m_, v_;
  double lr_ = 2e-4, beta1_ = 0.5, beta2_ = 0.999;
  double eps_ = 1e-8;
  long long t_ = 0;
};

// Fixed-length window average (serialized into checkpoints so resumed runs
// report identical smoothed values).
class RunningWindow {
 public:
  explicit RunningWindow(int capacity = 50) : buf_(static_cast<std::size_t>(capacity), 0.0) {}
  void push(double v);
  double mean() const;
  std::vector<double> serialize() const;
  static RunningWindow deserialize(const std::vector<double>& data);

 private:
  std::vector<double> buf_;
  int pos_ = 0;
  int count_ = 0;
};

struct StepMetrics {
  long long step = 0;
  LossReport report;
  double d_real = 0.0;  // mean D score on real patches
  double d_fake = 0.0;  // mean D score on fake patches
  double wall_ms = 0.0;  // console/timing only; never enters the metric log
};

struct TrainResult {
  std::string final_checkpoint;
  std::string metrics_path;
  long long steps_run = 0;
};

class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& cfg);

  // The optimizers hold pointers into heap storage owned by the networks'
  // containers, which moves leave in place; copies would alias, so they are
  // disallowed.
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;
  Trainer(Trainer&&) = default;
  Trainer& operator=(Trainer&&) = default;

  static Trainer resume(const std::string& checkpoint_path);

  // One D-then-G update; returns the step's metrics.
  StepMetrics train_step(const DomainDataset& ds_a, const DomainDataset& ds_b);

  // Runs from the current step to cfg.total_steps, appending one metric line
  // per step to out_dir/metrics.jsonl and checkpointing every
  // cfg.checkpoint_every steps plus at the end. on_step, when set, observes
  // every step's metrics (progress reporting).
  TrainResult train(const DomainDataset& ds_a, const DomainDataset& ds_b,
                    const std::string& out_dir,
                    const std::function<void(const StepMetrics&)>& on_step = {});

  void save_checkpoint(const std::string& path) const;

  const ExperimentConfig& config() const { return cfg_; }
  long long step() const { return step_; }
  Generator<float>& generator() { return G_; }
  const Generator<float>& generator() const { return G_; }
  double smoothed_patchnce_idB() const { return avg_idB_.mean(); }

  // Instrumentation for tests: per-layer feature indices used by the most
  // recent step (A-side PatchNCE draw).
  const std::vector<std::vector<int>>& last_indices_a() const { return last_indices_a_; }

  static std::string metrics_json_line(const StepMetrics& m);

 private:
  void build_networks(Rng init_rng);
  CheckpointData to_checkpoint() const;
  void restore(const CheckpointData& data);

  ExperimentConfig cfg_;
  Generator<float> G_;
  ProjectionHeads<float> H_;
  Discriminator<float> D_;
  Adam opt_g_, opt_d_;
  Rng rng_train_;
  long long step_ = 0;
  RunningWindow avg_idB_{50};
  RunningWindow avg_total_g_{50};
  std::vector<std::vector<int>> last_indices_a_;
  std::string diagnostic_dir_;  // set by train(); dumps on non-finite losses
};

}  // namespace mango
