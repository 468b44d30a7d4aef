#pragma once

// Versioned binary checkpoint archive: config snapshot, step counter, RNG
// state, named float tensors (weights + optimizer moments), and named double
// arrays (counters, running-average buffers). Little-endian layout; writes
// are atomic (temp file then rename).

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace mango {

struct CheckpointData {
  std::string config_json;
  long long step = 0;
  std::string rng_state;
  std::vector<std::pair<std::string, Eigen::MatrixXf>> tensors;
  std::vector<std::pair<std::string, std::vector<double>>> arrays;
};

void write_checkpoint(const std::string& path, const CheckpointData& data);

// Throws std::runtime_error("corrupt checkpoint: ...") on any malformation.
CheckpointData read_checkpoint(const std::string& path);

}  // namespace mango
