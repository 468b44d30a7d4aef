#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mango/diagnostics.hpp"
#include "mango/rng.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace mango;
using Eigen::MatrixXd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mango_diag_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

MatrixXd randm(int r, int c, Rng& rng) {
  MatrixXd m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

FeatureDump sample_dump(Rng& rng, bool with_labels, bool with_gan) {
  FeatureDump d;
  d.tau = 0.11;
  d.alpha = 0.4;
  d.theta = 0.35;
  d.weights = {0.9, 1.1, 1.3, 0.7};
  d.modified_scoring = true;
  d.include_self = false;
  d.Z = {randm(5, 3, rng), randm(4, 2, rng)};
  d.Zhat = {randm(5, 3, rng), randm(4, 2, rng)};
  if (with_labels) d.labels = {{0, 0, 1, 1, 2}, {1, 1, 0, 0}};
  if (with_gan) {
    d.real_scores = VecX<double>(3);
    d.real_scores << 0.8, 0.7, 0.9;
    d.fake_scores = VecX<double>(2);
    d.fake_scores << 0.2, 0.4;
  }
  return d;
}

}  // namespace

TEST_CASE("feature dumps round-trip exactly") {
  TempDir tmp;
  Rng rng(1);
  for (const bool labels : {false, true})
    for (const bool gan : {false, true}) {
      const FeatureDump d = sample_dump(rng, labels, gan);
      write_feature_dump(tmp.file("d.bin"), d);
      const FeatureDump back = read_feature_dump(tmp.file("d.bin"));
      CHECK(back.tau == d.tau);
      CHECK(back.alpha == d.alpha);
      CHECK(back.theta == d.theta);
      CHECK(back.weights.w_patchnce_A == d.weights.w_patchnce_A);
      CHECK(back.weights.w_gan == d.weights.w_gan);
      CHECK(back.modified_scoring == d.modified_scoring);
      CHECK(back.include_self == d.include_self);
      REQUIRE(back.Z.size() == d.Z.size());
      for (std::size_t l = 0; l < d.Z.size(); ++l) {
        CHECK((back.Z[l] - d.Z[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.Zhat[l] - d.Zhat[l]).cwiseAbs().maxCoeff() == 0.0);
      }
      CHECK(back.has_labels() == labels);
      if (labels) {
        REQUIRE(back.labels.size() == 2);
        CHECK(back.labels[0] == d.labels[0]);
        CHECK(back.labels[1] == d.labels[1]);
      }
      CHECK(back.has_gan() == gan);
      if (gan) {
        CHECK((back.real_scores - d.real_scores).cwiseAbs().maxCoeff() == 0.0);
        CHECK((back.fake_scores - d.fake_scores).cwiseAbs().maxCoeff() == 0.0);
      }
    }
}

TEST_CASE("corrupt dumps are rejected") {
  TempDir tmp;
  Rng rng(2);
  write_feature_dump(tmp.file("d.bin"), sample_dump(rng, true, true));
  SUBCASE("truncated") {
    fs::resize_file(tmp.file("d.bin"), fs::file_size(tmp.file("d.bin")) - 9);
    CHECK_THROWS(read_feature_dump(tmp.file("d.bin")));
  }
  SUBCASE("bad magic") {
    std::fstream f(tmp.file("d.bin"), std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXXXXXX", 8);
    f.close();
    CHECK_THROWS(read_feature_dump(tmp.file("d.bin")));
  }
  SUBCASE("missing") { CHECK_THROWS(read_feature_dump(tmp.file("gone.bin"))); }
}

TEST_CASE("loss_report_from_dump replays the exact loss definitions") {
  Rng rng(3);
  SUBCASE("full dump: patchnce + segnce + gan, against the oracles") {
    const FeatureDump d = sample_dump(rng, true, true);
    const LossReport rep = loss_report_from_dump(d);

    std::vector<MatrixXd> Zs(d.Z.begin(), d.Z.end());
    std::vector<MatrixXd> Zh(d.Zhat.begin(), d.Zhat.end());
    const double want_patch =
        oracle::patchnce(Zs, Zh, d.tau, d.modified_scoring, d.alpha, d.theta);
    const double want_seg = oracle::segnce(Zs, d.labels, d.tau, d.include_self);
    const double want_gan = oracle::gan({0.8, 0.7, 0.9}, {0.2, 0.4});

    CHECK(oracle::rel_err(rep.patchnce_A, want_patch) < 1e-9);
    CHECK(rep.patchnce_idB == 0.0);
    CHECK(oracle::rel_err(rep.segnce, want_seg) < 1e-9);
    CHECK(oracle::rel_err(rep.gan_G, want_gan) < 1e-9);
    CHECK(rep.gan_D == doctest::Approx(-want_gan).epsilon(1e-12));
    const double want_total = d.weights.w_patchnce_A * want_patch +
                              d.weights.w_segnce * want_seg + d.weights.w_gan * want_gan;
    CHECK(oracle::rel_err(rep.total_G, want_total) < 1e-9);
    CHECK(rep.total_D == doctest::Approx(-want_gan).epsilon(1e-12));
  }
  SUBCASE("no labels: segnce contributes zero") {
    const FeatureDump d = sample_dump(rng, false, true);
    const LossReport rep = loss_report_from_dump(d);
    CHECK(rep.segnce == 0.0);
  }
  SUBCASE("no gan scores: gan terms are zero") {
    const FeatureDump d = sample_dump(rng, true, false);
    const LossReport rep = loss_report_from_dump(d);
    CHECK(rep.gan_G == 0.0);
    CHECK(rep.gan_D == 0.0);
    CHECK(rep.total_D == 0.0);
  }
  SUBCASE("unmodified scoring toggles the case law off") {
    FeatureDump d = sample_dump(rng, false, false);
    d.modified_scoring = false;
    const LossReport rep = loss_report_from_dump(d);
    std::vector<MatrixXd> Zs(d.Z.begin(), d.Z.end());
    std::vector<MatrixXd> Zh(d.Zhat.begin(), d.Zhat.end());
    const double want = oracle::patchnce(Zs, Zh, d.tau, false, d.alpha, d.theta);
    CHECK(oracle::rel_err(rep.patchnce_A, want) < 1e-9);
  }
}
