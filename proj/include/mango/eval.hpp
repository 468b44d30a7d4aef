#pragma once

// Measurement procedures: dataset translation through a trained checkpoint,
// Frechet distance between embedded image sets, and average pairwise
// diversity. Embedders are pluggable; two lightweight built-ins cover
// desk-scale experiments, and externally produced feature files (Inception,
// LPIPS, ...) can be fed in through the flat feature-file format.

#include "mango/tensor.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mango {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd embed(const ImageF& image) const = 0;
};

// "down<N>" (e.g. "down8"): bicubic resize to NxN, flattened (dim 3*N*N).
// "proj<D>" (e.g. "proj64"): bicubic resize to 16x16, then a fixed seeded
// Gaussian projection to D dimensions. Unknown names throw.
std::unique_ptr<Embedder> make_embedder(const std::string& name);

// Sorted *.png paths from dir/images/ when that subdirectory exists, else
// from dir itself.
std::vector<std::string> list_image_files(const std::string& dir);

// One feature row per file, order-aligned. Failures rethrow naming the file.
Eigen::MatrixXd embed_files(const std::vector<std::string>& files, const Embedder& embedder);

// Feature file: char[8] magic "MANGOFT1", u32 version(1), u32 count,
// u32 dimension, then count*dimension row-major f32.
void write_features(const std::string& path, const Eigen::MatrixXd& features);
Eigen::MatrixXd read_features(const std::string& path);

// ||mu_x - mu_y||^2 + tr(C_x + C_y - 2 (C_x^{1/2} C_y C_x^{1/2})^{1/2}).
// When either covariance is near-singular, eps*I (eps = 1e-6) is added to
// both before the square root; the result is clamped to >= 0.
double compute_fid_from_moments(const Eigen::VectorXd& mu_x, const Eigen::MatrixXd& cov_x,
                                const Eigen::VectorXd& mu_y, const Eigen::MatrixXd& cov_y);

// Rows are samples. Unbiased covariance; requires >= 2 rows per side and
// equal dimensions.
double compute_fid(const Eigen::MatrixXd& feats_x, const Eigen::MatrixXd& feats_y);

struct DistanceOracle {
  std::string name;
  std::function<double(const ImageF&, const ImageF&)> distance;
};

// "l2": root-mean-square pixel difference. "const:<v>": constant v (test
// oracle). Unknown names throw.
DistanceOracle make_distance_oracle(const std::string& name);

// Mean oracle distance over all unordered pairs, or over max_pairs pairs
// subsampled uniformly without replacement when that is fewer (max_pairs <= 0
// means all pairs). Requires >= 2 images.
double average_pairwise_distance(const std::vector<ImageF>& images, const DistanceOracle& oracle,
                                 long long max_pairs = 0);

struct EvalReport {
  std::string metric;     // "fid" | "diversity"
  std::string embedder;   // embedder tag or oracle name
  std::string dataset_x;
  std::string dataset_y;  // empty for single-dataset metrics
  long long count_x = 0;
  long long count_y = 0;  // pair count for diversity
  double value = 0.0;
};

// JSON, written atomically (temp file then rename).
void write_eval_report(const std::string& path, const EvalReport& report);

struct TranslateResult {
  std::string manifest_path;
  long long count = 0;
};

// Runs every PNG under in_dir through the checkpointed generator, preserving
// basenames into out_dir, and writes out_dir/manifest.json. Inputs must match
// the checkpoint's image_size exactly; mismatches throw naming both sizes.
TranslateResult translate_dataset(const std::string& checkpoint_path, const std::string& in_dir,
                                  const std::string& out_dir);

}  // namespace mango
