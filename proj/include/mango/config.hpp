#pragma once

// Experiment configuration: every tunable the pipeline exposes, with
// validated defaults. Serialized as flat-key JSON; CLI --set overrides are
// applied on top of the file before validation.

#include <cstdint>
#include <string>
#include <vector>

namespace mango {

struct ExperimentConfig {
  // images / features
  int image_size = 256;
  double tau = 0.07;                  // InfoNCE temperature
  double alpha = 0.5;                 // false-negative damping factor, [0,1)
  double theta = 0.9;                 // similarity threshold, (-1,1]
  int num_features_per_layer = 256;   // N
  int segnce_features_per_layer = 256;  // S
  std::vector<std::string> tap_layers = {"input", "stem", "down1", "down2", "mid"};
  int num_classes = -1;               // C; required, no default

  // discriminator patch regularizer
  int patch_size = 64;
  int patches_per_image = 8;
  std::vector<double> rotation_set = {0.0, 90.0, 180.0, 270.0};  // degrees

  // loss weights (Eq. 8 terms)
  double w_patchnce_A = 1.0;
  double w_patchnce_idB = 1.0;
  double w_segnce = 1.0;
  double w_gan = 1.0;

  // optimizer
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 1;
  long long total_steps = 2000;
  bool lr_decay = false;  // linear decay over the last half of training
  int d_steps_per_g = 1;

  bool include_self_in_segnce_denominator = true;
  long long seed = 0;

  // architecture widths (defaults sized to the reference parameter counts)
  int g_base_width = 64;
  int g_res_blocks = 9;
  int d_base_width = 256;
  int head_hidden = 352;
  int embed_dim = 256;

  long long checkpoint_every = 1000;

  // Throws std::runtime_error naming the violated invariant.
  void validate() const;

  // True when every rotation is a right-angle multiple (lossless mode).
  bool right_angle_rotations() const;

  std::string to_json_string() const;
};

// Parses flat-key JSON; unspecified keys take defaults; unknown keys are
// errors. Validates before returning.
ExperimentConfig parse_config(const std::string& json_text);

ExperimentConfig load_config(const std::string& path);

// Applies "key=value" overrides (value parsed as JSON when possible) on top
// of the file contents, then validates. Override wins.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

ExperimentConfig parse_config(const std::string& json_text,
                              const std::vector<std::string>& overrides);

void save_config(const std::string& path, const ExperimentConfig& cfg);

}  // namespace mango
