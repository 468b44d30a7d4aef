#pragma once

// Diagnostic loss evaluation from serialized feature dumps: a flat binary
// format carrying per-layer embedding pairs (plus optional labels and GAN
// scores) that the loss functions are replayed over, producing a LossReport.
// Used by cross-implementation oracle tests and the `loss-report` command.
//
// Layout (little-endian):
//   char[8]  magic "MANGOFD1"
//   u32      version (1)
//   u32      L, number of layers
//   f64      tau, alpha, theta
//   f64[4]   weights: w_patchnce_A, w_patchnce_idB, w_segnce, w_gan
//   u8       modified_scoring, has_labels, include_self, has_gan
//   L x:     u32 n, u32 dim, f64[n*dim] Z (row-major), f64[n*dim] Z-hat,
//            (i32[n] labels iff has_labels)
//   if has_gan: u32 n_real, u32 n_fake, f64[n_real], f64[n_fake]
//
// The embedding pairs are treated as a domain-A PatchNCE instance
// (patchnce_idB is reported as 0); labels drive SegNCE over the Z side only.

#include "mango/losses.hpp"

#include <string>
#include <vector>

namespace mango {

struct FeatureDump {
  double tau = 0.07;
  double alpha = 0.5;
  double theta = 0.9;
  LossWeights weights;
  bool modified_scoring = true;
  bool include_self = true;
  std::vector<MatX<double>> Z;
  std::vector<MatX<double>> Zhat;
  std::vector<std::vector<int>> labels;  // empty when absent
  VecX<double> real_scores;              // size 0 when absent
  VecX<double> fake_scores;

  bool has_labels() const { return !labels.empty(); }
  bool has_gan() const { return real_scores.size() > 0; }
};

void write_feature_dump(const std::string& path, const FeatureDump& dump);
FeatureDump read_feature_dump(const std::string& path);

// Replays the losses over the dump's contents.
LossReport loss_report_from_dump(const FeatureDump& dump);

}  // namespace mango
