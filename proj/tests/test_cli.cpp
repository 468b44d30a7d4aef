// End-to-end tests of the command-line binary, run as a subprocess. The
// binary path is injected by the build as MANGO_CLI_PATH.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mango/diagnostics.hpp"
#include "mango/eval.hpp"
#include "mango/losses.hpp"

#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

using namespace mango;
namespace fs = std::filesystem;

#ifndef MANGO_CLI_PATH
#error "MANGO_CLI_PATH must be defined by the build"
#endif

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;  // captured stdout
  std::string last_line() const {
    const auto end = out.find_last_not_of('\n');
    if (end == std::string::npos) return "";
    const auto begin = out.find_last_of('\n', end);
    return out.substr(begin == std::string::npos ? 0 : begin + 1, end - (begin == std::string::npos ? 0 : begin + 1) + 1);
  }
};

// Runs `mango <args>` through the shell, capturing stdout only.
RunResult run(const std::string& args, const std::string& env_prefix = "") {
  const std::string cmd = env_prefix + std::string(MANGO_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// "key=value" token lookup on a status line.
std::string field(const std::string& line, const std::string& key) {
  const std::string needle = key + "=";
  std::size_t pos = 0;
  while (pos < line.size()) {
    const std::size_t end = line.find(' ', pos);
    const std::string tok = line.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    if (tok.rfind(needle, 0) == 0) return tok.substr(needle.size());
    if (end == std::string::npos) break;
    pos = end + 1;
  }
  return "";
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mango_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string dir(const std::string& name) const { return (path / name).string(); }
};

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int count_pngs(const std::string& dir) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".png") ++n;
  return n;
}

}  // namespace

TEST_CASE("help and parse errors use the documented exit codes") {
  CHECK(run("--help").exit_code == 0);
  CHECK(run("gen-data --help").exit_code == 0);
  CHECK(run("--no-such-flag").exit_code == 1);
  CHECK(run("frobnicate").exit_code == 1);
  CHECK(run("").exit_code == 1);  // a subcommand is required
  CHECK(run("eval").exit_code == 1);
}

TEST_CASE("gen-data: validation, determinism, and the seed environment fallback") {
  TempDir tmp;

  SUBCASE("n < 1 is a usage error with a machine-readable status") {
    const RunResult r = run("gen-data --out " + tmp.dir("x") + " --n 0 --style sim");
    CHECK(r.exit_code == 1);
    CHECK(r.last_line() == "status=error code=1");
  }

  SUBCASE("bad view range is a usage error") {
    const RunResult r =
        run("gen-data --out " + tmp.dir("x") + " --n 1 --style sim --view-range oops");
    CHECK(r.exit_code == 1);
  }

  SUBCASE("generation is reproducible and reports its outputs") {
    const std::string common = " --n 3 --style sim --seed 7 --num-classes 5 --image-size 32";
    const RunResult r1 = run("gen-data --out " + tmp.dir("a1") + common);
    REQUIRE(r1.exit_code == 0);
    const std::string line = r1.last_line();
    CHECK(field(line, "status") == "ok");
    CHECK(field(line, "count") == "3");
    CHECK(field(line, "seed") == "7");
    CHECK(fs::exists(tmp.dir("a1") + "/images/img_00002.png"));
    CHECK(fs::exists(tmp.dir("a1") + "/segs/img_00002.png"));
    CHECK(fs::exists(field(line, "manifest")));

    const RunResult r2 = run("gen-data --out " + tmp.dir("a2") + common);
    REQUIRE(r2.exit_code == 0);
    CHECK(file_bytes(tmp.dir("a1") + "/images/img_00000.png") ==
          file_bytes(tmp.dir("a2") + "/images/img_00000.png"));

    SUBCASE("MANGO_SEED fills in when --seed is absent") {
      const RunResult re = run("gen-data --out " + tmp.dir("a3") +
                                   " --n 3 --style sim --num-classes 5 --image-size 32",
                               "MANGO_SEED=7 ");
      REQUIRE(re.exit_code == 0);
      CHECK(field(re.last_line(), "seed") == "7");
      CHECK(file_bytes(tmp.dir("a1") + "/images/img_00000.png") ==
            file_bytes(tmp.dir("a3") + "/images/img_00000.png"));
    }

    SUBCASE("an explicit --seed wins over the environment") {
      const RunResult re = run("gen-data --out " + tmp.dir("a4") + common, "MANGO_SEED=99 ");
      REQUIRE(re.exit_code == 0);
      CHECK(field(re.last_line(), "seed") == "7");
    }
  }

  SUBCASE("a non-integer MANGO_SEED is a usage error") {
    const RunResult r = run("gen-data --out " + tmp.dir("x") + " --n 1 --style sim",
                            "MANGO_SEED=sevenish ");
    CHECK(r.exit_code == 1);
    CHECK(r.last_line() == "status=error code=1");
  }

  SUBCASE("real style omits segmentation maps") {
    const RunResult r = run("gen-data --out " + tmp.dir("b") + " --n 2 --style real --seed 1" +
                            std::string(" --image-size 32"));
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(tmp.dir("b") + "/images"));
    CHECK_FALSE(fs::exists(tmp.dir("b") + "/segs"));
  }
}

TEST_CASE("train / translate round trip through the filesystem") {
  TempDir tmp;
  REQUIRE(run("gen-data --out " + tmp.dir("A") + " --n 3 --style sim --seed 5 --num-classes 4" +
              " --image-size 16").exit_code == 0);
  REQUIRE(run("gen-data --out " + tmp.dir("B") + " --n 3 --style real --seed 6 --num-classes 4" +
              " --image-size 16").exit_code == 0);

  // minimal but complete experiment config
  std::ofstream cfg(tmp.dir("cfg.json"));
  cfg << R"({"num_classes": 4, "image_size": 16, "patch_size": 8, "patches_per_image": 2,
             "g_base_width": 4, "g_res_blocks": 2, "d_base_width": 8, "head_hidden": 8,
             "embed_dim": 8, "num_features_per_layer": 8, "segnce_features_per_layer": 8,
             "total_steps": 2, "checkpoint_every": 2, "seed": 1})";
  cfg.close();

  SUBCASE("a missing config file is a usage error") {
    const RunResult r = run("train --config " + tmp.dir("nope.json") + " --domain-a " +
                            tmp.dir("A") + " --domain-b " + tmp.dir("B") + " --out " + tmp.dir("run"));
    CHECK(r.exit_code == 1);
    CHECK(r.last_line() == "status=error code=1");
  }

  SUBCASE("a bad --set override is a usage error") {
    const RunResult r = run("train --config " + tmp.dir("cfg.json") + " --set tau " +
                            "--domain-a " + tmp.dir("A") + " --domain-b " + tmp.dir("B") +
                            " --out " + tmp.dir("run"));
    CHECK(r.exit_code == 1);
  }

  SUBCASE("training writes a checkpoint a translation pass can consume") {
    const RunResult r = run("train --config " + tmp.dir("cfg.json") + " --domain-a " + tmp.dir("A") +
                            " --domain-b " + tmp.dir("B") + " --out " + tmp.dir("run") +
                            " --log-every 0");
    REQUIRE(r.exit_code == 0);
    const std::string line = r.last_line();
    CHECK(field(line, "status") == "ok");
    CHECK(field(line, "steps") == "2");
    const std::string ckpt = field(line, "checkpoint");
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(field(line, "metrics")));

    const RunResult t = run("translate --checkpoint " + ckpt + " --in " + tmp.dir("A") +
                            " --out " + tmp.dir("trA"));
    REQUIRE(t.exit_code == 0);
    CHECK(field(t.last_line(), "count") == "3");
    // translated PNGs land directly in the output directory, next to manifest.json
    CHECK(count_pngs(tmp.dir("trA")) == 3);
    CHECK(fs::exists(tmp.dir("trA") + "/manifest.json"));
    CHECK(fs::exists(tmp.dir("trA") + "/img_00001.png"));

    SUBCASE("a truncated checkpoint is a runtime error, not a usage error") {
      const std::string bad = tmp.dir("bad.bin");
      const std::string bytes = file_bytes(ckpt);
      std::ofstream out(bad, std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 3));
      out.close();
      const RunResult tb =
          run("translate --checkpoint " + bad + " --in " + tmp.dir("A") + " --out " + tmp.dir("x"));
      CHECK(tb.exit_code == 2);
      CHECK(tb.last_line() == "status=error code=2");
    }

    SUBCASE("--resume rejects a simultaneous --config") {
      const RunResult rr = run("train --resume " + ckpt + " --config " + tmp.dir("cfg.json") +
                               " --domain-a " + tmp.dir("A") + " --domain-b " + tmp.dir("B") +
                               " --out " + tmp.dir("run2"));
      CHECK(rr.exit_code == 1);
    }
  }
}

TEST_CASE("eval fid: self-distance, feature files, and argument validation") {
  TempDir tmp;
  REQUIRE(run("gen-data --out " + tmp.dir("A") + " --n 4 --style sim --seed 5 --image-size 16")
              .exit_code == 0);

  SUBCASE("a set against itself scores zero") {
    const RunResult r = run("eval fid --x " + tmp.dir("A") + " --y " + tmp.dir("A") +
                            " --embedder down4 --report " + tmp.dir("fid.json"));
    REQUIRE(r.exit_code == 0);
    const std::string line = r.last_line();
    CHECK(field(line, "metric") == "fid");
    // self-distance is rounding noise from the matrix square root, not exact 0
    CHECK(std::abs(std::stod(field(line, "value"))) < 1e-6);
    CHECK(field(line, "embedder") == "down4");
    CHECK(field(line, "count_x") == "4");
    CHECK(fs::exists(tmp.dir("fid.json")));
  }

  SUBCASE("feature-file mode matches an in-process computation") {
    Eigen::MatrixXd fx(5, 3), fy(6, 3);
    Rng rng = Rng::stream(42, 1);
    for (Eigen::Index i = 0; i < fx.rows(); ++i)
      for (Eigen::Index j = 0; j < fx.cols(); ++j) fx(i, j) = rng.normal();
    for (Eigen::Index i = 0; i < fy.rows(); ++i)
      for (Eigen::Index j = 0; j < fy.cols(); ++j) fy(i, j) = rng.normal() + 0.5;
    write_features(tmp.dir("fx.bin"), fx);
    write_features(tmp.dir("fy.bin"), fy);
    // features are stored as float32, so reference the round-tripped matrices
    const double want = compute_fid(read_features(tmp.dir("fx.bin")),
                                    read_features(tmp.dir("fy.bin")));

    const RunResult r = run("eval fid --features-x " + tmp.dir("fx.bin") + " --features-y " +
                            tmp.dir("fy.bin") + " --report " + tmp.dir("fid2.json"));
    REQUIRE(r.exit_code == 0);
    CHECK(std::stod(field(r.last_line(), "value")) == doctest::Approx(want).epsilon(1e-12));
    CHECK(field(r.last_line(), "embedder") == "external");
  }

  SUBCASE("mixing directory and feature-file modes is rejected") {
    CHECK(run("eval fid --x " + tmp.dir("A") + " --y " + tmp.dir("A") + " --features-x " +
              tmp.dir("fx.bin") + " --features-y " + tmp.dir("fy.bin"))
              .exit_code == 1);
    CHECK(run("eval fid").exit_code == 1);
    CHECK(run("eval fid --x " + tmp.dir("A")).exit_code == 1);
  }

  SUBCASE("an unknown embedder is a usage error") {
    const RunResult r = run("eval fid --x " + tmp.dir("A") + " --y " + tmp.dir("A") +
                            " --embedder resnet50");
    CHECK(r.exit_code == 1);
  }

  SUBCASE("missing image directories are usage errors") {
    CHECK(run("eval fid --x " + tmp.dir("missing") + " --y " + tmp.dir("A")).exit_code == 1);
  }
}

TEST_CASE("eval diversity: oracle plumbing and reports") {
  TempDir tmp;
  REQUIRE(run("gen-data --out " + tmp.dir("A") + " --n 3 --style sim --seed 9 --image-size 16")
              .exit_code == 0);

  SUBCASE("the constant oracle pins the output value") {
    const RunResult r = run("eval diversity --in " + tmp.dir("A") + " --oracle const:0.3 --report " +
                            tmp.dir("div.json"));
    REQUIRE(r.exit_code == 0);
    CHECK(std::stod(field(r.last_line(), "value")) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(field(r.last_line(), "pairs") == "3");  // C(3,2)
    CHECK(fs::exists(tmp.dir("div.json")));
  }

  SUBCASE("the default l2 oracle yields a positive distance on distinct images") {
    const RunResult r = run("eval diversity --in " + tmp.dir("A"));
    REQUIRE(r.exit_code == 0);
    CHECK(std::stod(field(r.last_line(), "value")) > 0.0);
    fs::remove("eval_diversity.json");  // default report path, written in cwd
  }

  SUBCASE("an unknown oracle is a usage error") {
    CHECK(run("eval diversity --in " + tmp.dir("A") + " --oracle rmse").exit_code == 1);
  }

  SUBCASE("subsampled pair counts are reported") {
    const RunResult r = run("eval diversity --in " + tmp.dir("A") + " --oracle const:1 " +
                            "--max-pairs 2 --report " + tmp.dir("d2.json"));
    REQUIRE(r.exit_code == 0);
    CHECK(field(r.last_line(), "pairs") == "2");
  }
}

TEST_CASE("loss-report replays a feature dump from disk") {
  TempDir tmp;
  FeatureDump dump;
  dump.tau = 0.07;
  dump.weights = LossWeights{1.0, 1.0, 1.0, 1.0};
  MatX<double> Z(3, 2), Zh(3, 2);
  Z << 1, 0, 0, 1, 1, 1;
  Zh << 1, 0, 0, 1, 1, 0;
  dump.Z = {Z};
  dump.Zhat = {Zh};
  dump.labels = {{0, 0, 1}};
  dump.real_scores = Eigen::VectorXd::Constant(2, 0.8);
  dump.fake_scores = Eigen::VectorXd::Constant(2, 0.3);
  write_feature_dump(tmp.dir("d.dump"), dump);

  const LossReport want = loss_report_from_dump(read_feature_dump(tmp.dir("d.dump")));
  const RunResult r = run("loss-report --dump " + tmp.dir("d.dump"));
  REQUIRE(r.exit_code == 0);
  const std::string line = r.last_line();
  CHECK(field(line, "status") == "ok");
  CHECK(std::stod(field(line, "patchnce_A")) == doctest::Approx(want.patchnce_A).epsilon(1e-12));
  CHECK(std::stod(field(line, "segnce")) == doctest::Approx(want.segnce).epsilon(1e-12));
  CHECK(std::stod(field(line, "total_G")) == doctest::Approx(want.total_G).epsilon(1e-12));
  CHECK(std::stod(field(line, "total_D")) == doctest::Approx(want.total_D).epsilon(1e-12));

  SUBCASE("a missing dump is a runtime error") {
    const RunResult rb = run("loss-report --dump " + tmp.dir("none.dump"));
    CHECK(rb.exit_code == 2);
    CHECK(rb.last_line() == "status=error code=2");
  }
}
