#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mango/png_io.hpp"
#include "mango/rng.hpp"

#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>

using namespace mango;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mango_png_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("RGB image round-trip stays within the 8-bit quantization bound") {
  TempDir tmp;
  Rng rng(17);
  ImageF img(3, 12, 9);
  for (int i = 0; i < img.m.size(); ++i)
    img.m.data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  write_image_rgb(tmp.file("a.png"), img);
  const ImageF back = read_image_rgb(tmp.file("a.png"));
  CHECK(back.channels == 3);
  CHECK(back.height == 12);
  CHECK(back.width == 9);
  // one 8-bit step is 2/255; rounding error is at most half a step
  CHECK((back.m - img.m).cwiseAbs().maxCoeff() <= 1.0f / 255.0f + 1e-6f);
}

TEST_CASE("values already on the quantization grid round-trip exactly") {
  TempDir tmp;
  ImageF img(3, 4, 4);
  for (int i = 0; i < img.m.size(); ++i) {
    const int byte = (i * 37) % 256;
    img.m.data()[i] = static_cast<float>(byte / 127.5 - 1.0);
  }
  write_image_rgb(tmp.file("grid.png"), img);
  const ImageF back = read_image_rgb(tmp.file("grid.png"));
  CHECK((back.m - img.m).cwiseAbs().maxCoeff() <= 1e-6f);
}

TEST_CASE("out-of-range values are clamped on write") {
  TempDir tmp;
  ImageF img = ImageF::constant(3, 2, 2, 0.0f);
  img.at(0, 0, 0) = 5.0f;
  img.at(1, 0, 0) = -5.0f;
  write_image_rgb(tmp.file("clamp.png"), img);
  const ImageF back = read_image_rgb(tmp.file("clamp.png"));
  CHECK(back.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(back.at(1, 0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("segmentation maps round-trip exactly") {
  TempDir tmp;
  Rng rng(23);
  SegMap seg(7, 5);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 5; ++c) seg(r, c) = static_cast<int>(rng.below(256));
  write_segmentation(tmp.file("seg.png"), seg);
  const SegMap back = read_segmentation(tmp.file("seg.png"));
  CHECK(back.rows() == 7);
  CHECK(back.cols() == 5);
  CHECK((back - seg).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("reading an RGB PNG as segmentation is rejected with a clear message") {
  TempDir tmp;
  const ImageF img = ImageF::constant(3, 4, 4, 0.25f);
  write_image_rgb(tmp.file("rgb.png"), img);
  CHECK_THROWS_WITH_AS(read_segmentation(tmp.file("rgb.png")),
                       doctest::Contains("segmentation PNG is not 8-bit grayscale"),
                       std::runtime_error);
}

TEST_CASE("grayscale PNGs read as RGB replicate the channel") {
  TempDir tmp;
  SegMap seg(3, 3);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) seg(r, c) = 10 * (3 * r + c);
  write_segmentation(tmp.file("gray.png"), seg);
  const ImageF rgb = read_image_rgb(tmp.file("gray.png"));
  CHECK(rgb.channels == 3);
  CHECK((rgb.m.row(0) - rgb.m.row(1)).cwiseAbs().maxCoeff() == 0.0f);
  CHECK((rgb.m.row(0) - rgb.m.row(2)).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(rgb.at(0, 0, 1) == doctest::Approx(10.0 / 127.5 - 1.0).epsilon(1e-6));
}

TEST_CASE("missing files raise errors that name the path") {
  TempDir tmp;
  const std::string missing = tmp.file("nope.png");
  CHECK_THROWS_WITH_AS(read_image_rgb(missing), doctest::Contains("nope.png"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(read_segmentation(missing), doctest::Contains("nope.png"),
                       std::runtime_error);
}

TEST_CASE("segmentation labels outside [0,255] are rejected on write") {
  TempDir tmp;
  SegMap seg = SegMap::Zero(2, 2);
  seg(0, 0) = 256;
  CHECK_THROWS(write_segmentation(tmp.file("bad.png"), seg));
}
