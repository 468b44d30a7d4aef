#include "mango/diagnostics.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mango {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'N', 'G', 'O', 'F', 'D', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is, const char* what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw std::runtime_error(std::string("truncated feature dump reading ") + what);
  return v;
}

// Row-major on disk; our matrices are one embedding per row.
void put_matrix(std::ostream& os, const MatX<double>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put(os, m(i, j));
}

MatX<double> get_matrix(std::istream& is, int rows, int cols) {
  MatX<double> m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = get<double>(is, "matrix entry");
  return m;
}

}  // namespace

void write_feature_dump(const std::string& path, const FeatureDump& dump) {
  require(dump.Z.size() == dump.Zhat.size(), "feature dump: layer count mismatch");
  require(!dump.has_labels() || dump.labels.size() == dump.Z.size(),
          "feature dump: label layer count mismatch");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write feature dump: " + path);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(dump.Z.size()));
  put(os, dump.tau);
  put(os, dump.alpha);
  put(os, dump.theta);
  put(os, dump.weights.w_patchnce_A);
  put(os, dump.weights.w_patchnce_idB);
  put(os, dump.weights.w_segnce);
  put(os, dump.weights.w_gan);
  put<std::uint8_t>(os, dump.modified_scoring ? 1 : 0);
  put<std::uint8_t>(os, dump.has_labels() ? 1 : 0);
  put<std::uint8_t>(os, dump.include_self ? 1 : 0);
  put<std::uint8_t>(os, dump.has_gan() ? 1 : 0);
  for (std::size_t l = 0; l < dump.Z.size(); ++l) {
    const auto& Z = dump.Z[l];
    const auto& Zh = dump.Zhat[l];
    require(Z.rows() == Zh.rows() && Z.cols() == Zh.cols(), "feature dump: pair shape mismatch");
    put<std::uint32_t>(os, static_cast<std::uint32_t>(Z.rows()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(Z.cols()));
    put_matrix(os, Z);
    put_matrix(os, Zh);
    if (dump.has_labels()) {
      require(dump.labels[l].size() == static_cast<std::size_t>(Z.rows()),
              "feature dump: label count mismatch");
      for (int y : dump.labels[l]) put<std::int32_t>(os, y);
    }
  }
  if (dump.has_gan()) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dump.real_scores.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(dump.fake_scores.size()));
    for (Eigen::Index i = 0; i < dump.real_scores.size(); ++i) put(os, dump.real_scores(i));
    for (Eigen::Index i = 0; i < dump.fake_scores.size(); ++i) put(os, dump.fake_scores(i));
  }
  if (!os) throw std::runtime_error("failed writing feature dump: " + path);
}

FeatureDump read_feature_dump(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open feature dump: " + path);
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("bad feature dump magic: " + path);
  const auto version = get<std::uint32_t>(is, "version");
  if (version != 1)
    throw std::runtime_error("unsupported feature dump version " + std::to_string(version));
  const auto layers = get<std::uint32_t>(is, "layer count");
  if (layers == 0 || layers > 64)
    throw std::runtime_error("feature dump layer count out of range");

  FeatureDump dump;
  dump.tau = get<double>(is, "tau");
  dump.alpha = get<double>(is, "alpha");
  dump.theta = get<double>(is, "theta");
  dump.weights.w_patchnce_A = get<double>(is, "w_patchnce_A");
  dump.weights.w_patchnce_idB = get<double>(is, "w_patchnce_idB");
  dump.weights.w_segnce = get<double>(is, "w_segnce");
  dump.weights.w_gan = get<double>(is, "w_gan");
  dump.modified_scoring = get<std::uint8_t>(is, "modified flag") != 0;
  const bool has_labels = get<std::uint8_t>(is, "labels flag") != 0;
  dump.include_self = get<std::uint8_t>(is, "include_self flag") != 0;
  const bool has_gan = get<std::uint8_t>(is, "gan flag") != 0;

  for (std::uint32_t l = 0; l < layers; ++l) {
    const auto n = get<std::uint32_t>(is, "feature count");
    const auto dim = get<std::uint32_t>(is, "feature dim");
    if (n == 0 || n > (1u << 20) || dim == 0 || dim > (1u << 16))
      throw std::runtime_error("feature dump shape out of range");
    dump.Z.push_back(get_matrix(is, static_cast<int>(n), static_cast<int>(dim)));
    dump.Zhat.push_back(get_matrix(is, static_cast<int>(n), static_cast<int>(dim)));
    if (has_labels) {
      std::vector<int> y(n);
      for (auto& v : y) v = get<std::int32_t>(is, "label");
      dump.labels.push_back(std::move(y));
    }
  }
  if (has_gan) {
    const auto nr = get<std::uint32_t>(is, "real count");
    const auto nf = get<std::uint32_t>(is, "fake count");
    if (nr == 0 || nf == 0 || nr > (1u << 20) || nf > (1u << 20))
      throw std::runtime_error("feature dump GAN score counts out of range");
    dump.real_scores.resize(nr);
    dump.fake_scores.resize(nf);
    for (std::uint32_t i = 0; i < nr; ++i) dump.real_scores(i) = get<double>(is, "real score");
    for (std::uint32_t i = 0; i < nf; ++i) dump.fake_scores(i) = get<double>(is, "fake score");
  }
  return dump;
}

LossReport loss_report_from_dump(const FeatureDump& dump) {
  const PatchNceResult<double> pnce =
      patchnce_loss<double>(dump.Z, dump.Zhat, dump.tau, dump.modified_scoring, dump.alpha,
                            dump.theta);
  double seg = 0.0;
  if (dump.has_labels())
    seg = segnce_loss<double>(dump.Z, dump.labels, dump.tau, dump.include_self).value;
  double gan = 0.0;
  if (dump.has_gan()) gan = gan_loss<double>(dump.real_scores, dump.fake_scores).value;
  return total_losses(pnce.value, 0.0, seg, gan, dump.weights);
}

}  // namespace mango
