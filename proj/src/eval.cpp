#include "mango/eval.hpp"

#include "mango/image.hpp"
#include "mango/png_io.hpp"
#include "mango/rng.hpp"
#include "mango/trainer.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace mango {

namespace fs = std::filesystem;
using nlohmann::json;

// --- embedders -----------------------------------------------------------------

namespace {

class DownsampleEmbedder final : public Embedder {
 public:
  explicit DownsampleEmbedder(int side) : side_(side) {
    require(side_ > 0, "embedder downsample side must be positive");
  }
  std::string name() const override { return "down" + std::to_string(side_); }
  int dim() const override { return 3 * side_ * side_; }
  Eigen::VectorXd embed(const ImageF& image) const override {
    const ImageF small = resize(image, side_, side_, Filter::Bicubic);
    Eigen::VectorXd v(dim());
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < side_ * side_; ++p)
        v(c * side_ * side_ + p) = static_cast<double>(small.m(c, p));
    return v;
  }

 private:
  int side_;
};

class RandomProjectionEmbedder final : public Embedder {
 public:
  explicit RandomProjectionEmbedder(int out_dim) : out_dim_(out_dim) {
    require(out_dim_ > 0, "embedder projection dim must be positive");
    const int in_dim = 3 * kSide * kSide;
    Rng rng = Rng::stream(0, rng_stream::kEmbedder);
    W_.resize(out_dim_, in_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (int r = 0; r < out_dim_; ++r)
      for (int c = 0; c < in_dim; ++c) W_(r, c) = scale * rng.normal();
  }
  std::string name() const override { return "proj" + std::to_string(out_dim_); }
  int dim() const override { return out_dim_; }
  Eigen::VectorXd embed(const ImageF& image) const override {
    const ImageF small = resize(image, kSide, kSide, Filter::Bicubic);
    Eigen::VectorXd flat(3 * kSide * kSide);
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < kSide * kSide; ++p)
        flat(c * kSide * kSide + p) = static_cast<double>(small.m(c, p));
    return W_ * flat;
  }

 private:
  static constexpr int kSide = 16;
  int out_dim_;
  Eigen::MatrixXd W_;
};

int parse_suffix_int(const std::string& name, const std::string& prefix) {
  const std::string rest = name.substr(prefix.size());
  require(!rest.empty() && rest.find_first_not_of("0123456789") == std::string::npos,
          "unknown embedder: " + name);
  return std::stoi(rest);
}

}  // namespace

std::unique_ptr<Embedder> make_embedder(const std::string& name) {
  if (name.rfind("down", 0) == 0)
    return std::make_unique<DownsampleEmbedder>(parse_suffix_int(name, "down"));
  if (name.rfind("proj", 0) == 0)
    return std::make_unique<RandomProjectionEmbedder>(parse_suffix_int(name, "proj"));
  throw std::runtime_error("unknown embedder: " + name);
}

std::vector<std::string> list_image_files(const std::string& dir) {
  fs::path root(dir);
  if (!fs::exists(root)) throw std::runtime_error("dataset directory not found: " + dir);
  if (fs::is_directory(root / "images")) root /= "images";
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

Eigen::MatrixXd embed_files(const std::vector<std::string>& files, const Embedder& embedder) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(files.size()), embedder.dim());
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      out.row(static_cast<Eigen::Index>(i)) = embedder.embed(read_image_rgb(files[i])).transpose();
    } catch (const std::exception& e) {
      throw std::runtime_error("embedding failed for " + files[i] + ": " + e.what());
    }
  }
  return out;
}

// --- feature files ----------------------------------------------------------------

namespace {
constexpr char kFeatureMagic[8] = {'M', 'A', 'N', 'G', 'O', 'F', 'T', '1'};
}

void write_features(const std::string& path, const Eigen::MatrixXd& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature file: " + path);
  out.write(kFeatureMagic, 8);
  const std::uint32_t version = 1;
  const std::uint32_t count = static_cast<std::uint32_t>(features.rows());
  const std::uint32_t dim = static_cast<std::uint32_t>(features.cols());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  std::vector<float> row(dim);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j)
      row[static_cast<std::size_t>(j)] = static_cast<float>(features(i, j));
    out.write(reinterpret_cast<const char*>(row.data()), 4 * static_cast<std::streamsize>(dim));
  }
  if (!out) throw std::runtime_error("failed writing feature file: " + path);
}

Eigen::MatrixXd read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kFeatureMagic, 8) != 0)
    throw std::runtime_error("corrupt feature file: bad magic: " + path);
  std::uint32_t version = 0, count = 0, dim = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (!in || version != 1)
    throw std::runtime_error("corrupt feature file: unsupported version: " + path);
  if (dim == 0) throw std::runtime_error("corrupt feature file: zero dimension: " + path);
  Eigen::MatrixXd out(count, dim);
  std::vector<float> row(dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(row.data()), 4 * static_cast<std::streamsize>(dim));
    if (!in) throw std::runtime_error("corrupt feature file: truncated data: " + path);
    for (std::uint32_t j = 0; j < dim; ++j) out(i, j) = static_cast<double>(row[j]);
  }
  return out;
}

// --- FID ---------------------------------------------------------------------------

double compute_fid_from_moments(const Eigen::VectorXd& mu_x, const Eigen::MatrixXd& cov_x,
                                const Eigen::VectorXd& mu_y, const Eigen::MatrixXd& cov_y) {
  const Eigen::Index d = mu_x.size();
  require(mu_y.size() == d && cov_x.rows() == d && cov_x.cols() == d && cov_y.rows() == d &&
              cov_y.cols() == d,
          "compute_fid: dimension mismatch");

  const double mean_term = (mu_x - mu_y).squaredNorm();
  Eigen::MatrixXd cx = 0.5 * (cov_x + cov_x.transpose());
  Eigen::MatrixXd cy = 0.5 * (cov_y + cov_y.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_x(cx);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_y(cy);
  require(es_x.info() == Eigen::Success && es_y.info() == Eigen::Success,
          "compute_fid: eigendecomposition failed");
  constexpr double kSingularTol = 1e-10;
  constexpr double kEps = 1e-6;
  if (es_x.eigenvalues().minCoeff() < kSingularTol ||
      es_y.eigenvalues().minCoeff() < kSingularTol) {
    cx.diagonal().array() += kEps;
    cy.diagonal().array() += kEps;
    es_x.compute(cx);
    require(es_x.info() == Eigen::Success, "compute_fid: eigendecomposition failed");
  }

  const Eigen::VectorXd lam = es_x.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd sqrt_cx =
      es_x.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es_x.eigenvectors().transpose();
  Eigen::MatrixXd prod = sqrt_cx * cy * sqrt_cx;
  prod = 0.5 * (prod + prod.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_p(prod);
  require(es_p.info() == Eigen::Success, "compute_fid: eigendecomposition failed");
  const double tr_sqrt = es_p.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double fid = mean_term + cx.trace() + cy.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, fid);
}

namespace {

void moments(const Eigen::MatrixXd& feats, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  const Eigen::Index n = feats.rows();
  mu = feats.colwise().mean().transpose();
  const Eigen::MatrixXd centered = feats.rowwise() - mu.transpose();
  cov = centered.transpose() * centered / static_cast<double>(n - 1);
}

}  // namespace

double compute_fid(const Eigen::MatrixXd& feats_x, const Eigen::MatrixXd& feats_y) {
  require(feats_x.rows() >= 2 && feats_y.rows() >= 2,
          "compute_fid: need at least 2 samples per side");
  require(feats_x.cols() == feats_y.cols(), "compute_fid: dimension mismatch");
  Eigen::VectorXd mu_x, mu_y;
  Eigen::MatrixXd cov_x, cov_y;
  moments(feats_x, mu_x, cov_x);
  moments(feats_y, mu_y, cov_y);
  return compute_fid_from_moments(mu_x, cov_x, mu_y, cov_y);
}

// --- diversity ---------------------------------------------------------------------

DistanceOracle make_distance_oracle(const std::string& name) {
  if (name == "l2") {
    return {"l2", [](const ImageF& a, const ImageF& b) {
              require(a.same_shape(b), "l2 oracle: image shape mismatch, " + a.shape_str() +
                                           " vs " + b.shape_str());
              const double ss = (a.m - b.m).cast<double>().array().square().sum();
              return std::sqrt(ss / static_cast<double>(a.numel()));
            }};
  }
  if (name.rfind("const:", 0) == 0) {
    std::size_t pos = 0;
    double v = 0.0;
    const std::string num = name.substr(6);
    try {
      v = std::stod(num, &pos);
    } catch (const std::exception&) {
      throw std::runtime_error("unknown distance oracle: " + name);
    }
    if (pos != num.size()) throw std::runtime_error("unknown distance oracle: " + name);
    return {name, [v](const ImageF&, const ImageF&) { return v; }};
  }
  throw std::runtime_error("unknown distance oracle: " + name);
}

double average_pairwise_distance(const std::vector<ImageF>& images, const DistanceOracle& oracle,
                                 long long max_pairs) {
  const long long n = static_cast<long long>(images.size());
  require(n >= 2, "average_pairwise_distance: need at least 2 images");
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  std::vector<std::pair<int, int>> chosen;
  if (max_pairs > 0 && max_pairs < static_cast<long long>(pairs.size())) {
    Rng rng = Rng::stream(0, rng_stream::kDiversityPairs);
    for (int idx : rng.sample_without_replacement(static_cast<int>(pairs.size()),
                                                  static_cast<int>(max_pairs)))
      chosen.push_back(pairs[static_cast<std::size_t>(idx)]);
  } else {
    chosen = std::move(pairs);
  }

  double sum = 0.0;
  for (const auto& [i, j] : chosen)
    sum += oracle.distance(images[static_cast<std::size_t>(i)], images[static_cast<std::size_t>(j)]);
  return sum / static_cast<double>(chosen.size());
}

// --- reports ----------------------------------------------------------------------

void write_eval_report(const std::string& path, const EvalReport& report) {
  json j;
  j["metric"] = report.metric;
  j["embedder"] = report.embedder;
  j["dataset_x"] = report.dataset_x;
  j["dataset_y"] = report.dataset_y;
  j["count_x"] = report.count_x;
  j["count_y"] = report.count_y;
  j["value"] = report.value;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("failed writing report: " + path);
  }
  fs::rename(tmp, path);
}

// --- translation -------------------------------------------------------------------

TranslateResult translate_dataset(const std::string& checkpoint_path, const std::string& in_dir,
                                  const std::string& out_dir) {
  Trainer trainer = Trainer::resume(checkpoint_path);
  const int n = trainer.config().image_size;

  const std::vector<std::string> files = list_image_files(in_dir);
  require(!files.empty(), "no PNG images found under: " + in_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + out_dir);

  json manifest;
  manifest["checkpoint"] = checkpoint_path;
  manifest["image_size"] = n;
  manifest["count"] = files.size();
  json names = json::array();
  for (const auto& f : files) {
    const ImageF img = read_image_rgb(f);
    if (img.height != n || img.width != n)
      throw std::runtime_error("image size " + std::to_string(img.height) + "x" +
                               std::to_string(img.width) + " does not match checkpoint image_size " +
                               std::to_string(n) + "x" + std::to_string(n) + ": " + f);
    Generator<float>::FullCache cache;
    const ImageF translated = trainer.generator().forward(img, cache);
    const std::string base = fs::path(f).filename().string();
    write_image_rgb((fs::path(out_dir) / base).string(), translated);
    names.push_back(base);
  }
  manifest["files"] = names;

  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
  std::ofstream out(manifest_path);
  if (!out) throw std::runtime_error("cannot write manifest: " + manifest_path);
  out << manifest.dump(2) << "\n";
  return TranslateResult{manifest_path, static_cast<long long>(files.size())};
}

}  // namespace mango
