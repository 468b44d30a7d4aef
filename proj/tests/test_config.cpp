#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mango/config.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

using namespace mango;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal = R"({"num_classes": 6})";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mango_cfg_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("a minimal config takes documented defaults") {
  const ExperimentConfig cfg = parse_config(kMinimal);
  CHECK(cfg.num_classes == 6);
  CHECK(cfg.image_size == 256);
  CHECK(cfg.tau == 0.07);
  CHECK(cfg.alpha == 0.5);
  CHECK(cfg.theta == 0.9);
  CHECK(cfg.num_features_per_layer == 256);
  CHECK(cfg.segnce_features_per_layer == 256);
  CHECK(cfg.tap_layers ==
        std::vector<std::string>{"input", "stem", "down1", "down2", "mid"});
  CHECK(cfg.patch_size == 64);
  CHECK(cfg.patches_per_image == 8);
  CHECK(cfg.rotation_set == std::vector<double>{0.0, 90.0, 180.0, 270.0});
  CHECK(cfg.w_patchnce_A == 1.0);
  CHECK(cfg.w_patchnce_idB == 1.0);
  CHECK(cfg.w_segnce == 1.0);
  CHECK(cfg.w_gan == 1.0);
  CHECK(cfg.learning_rate == 2e-4);
  CHECK(cfg.beta1 == 0.5);
  CHECK(cfg.beta2 == 0.999);
  CHECK(cfg.batch_size == 1);
  CHECK(cfg.total_steps == 2000);
  CHECK(cfg.lr_decay == false);
  CHECK(cfg.d_steps_per_g == 1);
  CHECK(cfg.include_self_in_segnce_denominator == true);
  CHECK(cfg.seed == 0);
  CHECK(cfg.checkpoint_every == 1000);
  CHECK(cfg.right_angle_rotations());
}

TEST_CASE("num_classes is required") {
  CHECK_THROWS_WITH_AS(parse_config("{}"), doctest::Contains("num_classes"),
                       std::runtime_error);
}

TEST_CASE("validation names the violated field") {
  auto expect_reject = [](const std::string& body, const char* needle) {
    const std::string text = R"({"num_classes": 6, )" + body + "}";
    CHECK_THROWS_WITH_AS(parse_config(text), doctest::Contains(needle),
                         std::runtime_error);
  };
  expect_reject(R"("tau": 0)", "tau");
  expect_reject(R"("tau": -0.1)", "tau");
  expect_reject(R"("alpha": 1.0)", "alpha");
  expect_reject(R"("alpha": -0.2)", "alpha");
  expect_reject(R"("theta": 1.5)", "theta");
  expect_reject(R"("theta": -1.0)", "theta");
  expect_reject(R"("image_size": 0)", "image_size");
  expect_reject(R"("num_features_per_layer": 0)", "num_features_per_layer");
  expect_reject(R"("segnce_features_per_layer": -3)", "segnce_features_per_layer");
  expect_reject(R"("patch_size": 0)", "patch_size");
  expect_reject(R"("patch_size": 300)", "patch_size");  // exceeds image_size 256
  expect_reject(R"("patches_per_image": 0)", "patches_per_image");
  expect_reject(R"("rotation_set": [])", "rotation_set");
  expect_reject(R"("num_classes": 0)", "num_classes");
  expect_reject(R"("learning_rate": 0)", "learning_rate");
  expect_reject(R"("beta1": 1.0)", "beta1");
  expect_reject(R"("beta2": -0.1)", "beta2");
  expect_reject(R"("batch_size": 0)", "batch_size");
  expect_reject(R"("total_steps": -1)", "total_steps");
  expect_reject(R"("d_steps_per_g": 0)", "d_steps_per_g");
  expect_reject(R"("checkpoint_every": 0)", "checkpoint_every");
  expect_reject(R"("tap_layers": [])", "tap_layers");
  expect_reject(R"("tap_layers": ["input", "bogus"])", "bogus");
  expect_reject(R"("embed_dim": 0)", "embed_dim");
  expect_reject(R"("g_base_width": 0)", "g_base_width");
  expect_reject(R"("w_gan": -0.5)", "weights");
  expect_reject(R"("tau": "abc")", "tau");  // wrong type
}

TEST_CASE("boundary values are accepted") {
  CHECK_NOTHROW(parse_config(R"({"num_classes": 6, "theta": 1.0})"));
  CHECK_NOTHROW(parse_config(R"({"num_classes": 6, "alpha": 0.0})"));
  CHECK_NOTHROW(parse_config(R"({"num_classes": 1})"));
  CHECK_NOTHROW(
      parse_config(R"({"num_classes": 6, "image_size": 64, "patch_size": 64})"));
}

TEST_CASE("unknown keys are rejected by name") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"num_classes": 6, "taau": 0.1})"),
                       doctest::Contains("taau"), std::runtime_error);
}

TEST_CASE("malformed JSON is rejected") {
  CHECK_THROWS(parse_config("{num_classes: 6"));
}

TEST_CASE("JSON round-trip preserves every field") {
  ExperimentConfig cfg = parse_config(kMinimal);
  cfg.tau = 0.11;
  cfg.rotation_set = {0.0, 45.0};
  cfg.tap_layers = {"input", "mid"};
  cfg.lr_decay = true;
  cfg.total_steps = 123456789012LL;
  cfg.seed = 987654321LL;
  const ExperimentConfig back = parse_config(cfg.to_json_string());
  CHECK(back.tau == cfg.tau);
  CHECK(back.rotation_set == cfg.rotation_set);
  CHECK(back.tap_layers == cfg.tap_layers);
  CHECK(back.lr_decay == cfg.lr_decay);
  CHECK(back.total_steps == cfg.total_steps);
  CHECK(back.seed == cfg.seed);
  CHECK(back.num_classes == cfg.num_classes);
  CHECK_FALSE(back.right_angle_rotations());
}

TEST_CASE("file load applies overrides on top of the file") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("cfg.json"));
    out << R"({"num_classes": 6, "tau": 0.07, "image_size": 64})";
  }
  SUBCASE("scalar override wins") {
    const auto cfg = load_config(tmp.file("cfg.json"), {"tau=0.5", "seed=42"});
    CHECK(cfg.tau == 0.5);
    CHECK(cfg.seed == 42);
    CHECK(cfg.image_size == 64);
  }
  SUBCASE("list override parses as JSON") {
    const auto cfg =
        load_config(tmp.file("cfg.json"), {"rotation_set=[0,180]"});
    CHECK(cfg.rotation_set == std::vector<double>{0.0, 180.0});
    CHECK(cfg.right_angle_rotations());
  }
  SUBCASE("boolean override") {
    const auto cfg = load_config(tmp.file("cfg.json"), {"lr_decay=true"});
    CHECK(cfg.lr_decay);
  }
  SUBCASE("override of an unknown key is rejected") {
    CHECK_THROWS_WITH_AS(load_config(tmp.file("cfg.json"), {"nope=3"}),
                         doctest::Contains("nope"), std::runtime_error);
  }
  SUBCASE("override without '=' is rejected") {
    CHECK_THROWS(load_config(tmp.file("cfg.json"), {"tau"}));
  }
  SUBCASE("override violating validation is rejected") {
    CHECK_THROWS_WITH_AS(load_config(tmp.file("cfg.json"), {"tau=-1"}),
                         doctest::Contains("tau"), std::runtime_error);
  }
}

TEST_CASE("missing config file raises an error naming the path") {
  CHECK_THROWS_WITH_AS(load_config("/nonexistent/cfg.json"),
                       doctest::Contains("cfg.json"), std::runtime_error);
}

TEST_CASE("save_config writes a loadable file") {
  TempDir tmp;
  ExperimentConfig cfg = parse_config(kMinimal);
  cfg.image_size = 32;
  cfg.patch_size = 16;  // keep the saved config valid for reloading
  save_config(tmp.file("out.json"), cfg);
  const auto back = load_config(tmp.file("out.json"));
  CHECK(back.image_size == 32);
  CHECK(back.patch_size == 16);
  CHECK(back.num_classes == 6);
}

TEST_CASE("right_angle_rotations detects the lossless rotation set") {
  ExperimentConfig cfg = parse_config(kMinimal);
  cfg.rotation_set = {0.0, 90.0, 180.0, 270.0};
  CHECK(cfg.right_angle_rotations());
  cfg.rotation_set = {0.0};
  CHECK(cfg.right_angle_rotations());
  cfg.rotation_set = {0.0, 45.0};
  CHECK_FALSE(cfg.right_angle_rotations());
  cfg.rotation_set = {360.0};
  CHECK(cfg.right_angle_rotations());
}
