#include "mango/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace mango {

namespace {

struct PngReader {
  FILE* fp = nullptr;
  png_structp png = nullptr;
  png_infop info = nullptr;

  explicit PngReader(const std::string& path) {
    fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("cannot open PNG: " + path);
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      close();
      throw std::runtime_error("libpng init failed: " + path);
    }
  }

  ~PngReader() { close(); }

  void close() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
    png = nullptr;
    info = nullptr;
    fp = nullptr;
  }
};

// Decodes rows after the caller has configured transforms. Errors inside
// libpng longjmp back here; convert to an exception outside the jump scope.
bool read_rows(PngReader& r, std::vector<png_bytep>& rows) {
  if (setjmp(png_jmpbuf(r.png))) return false;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
  return true;
}

bool read_header(PngReader& r) {
  if (setjmp(png_jmpbuf(r.png))) return false;
  png_init_io(r.png, r.fp);
  png_read_info(r.png, r.info);
  return true;
}

}  // namespace

ImageF read_image_rgb(const std::string& path) {
  PngReader r(path);
  if (!read_header(r)) throw std::runtime_error("failed to parse PNG header: " + path);

  const png_uint_32 w = png_get_image_width(r.png, r.info);
  const png_uint_32 h = png_get_image_height(r.png, r.info);
  const int color = png_get_color_type(r.png, r.info);
  const int depth = png_get_bit_depth(r.png, r.info);
  if (w == 0 || h == 0) throw std::runtime_error("empty PNG: " + path);

  if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("failed to decode PNG: " + path);
  png_set_expand(r.png);
  if (depth == 16) png_set_strip_16(r.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(r.png);
  png_read_update_info(r.png, r.info);
  if (png_get_rowbytes(r.png, r.info) != 3 * w)
    throw std::runtime_error("unexpected PNG row layout: " + path);

  std::vector<png_byte> buf(static_cast<std::size_t>(3) * w * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 i = 0; i < h; ++i) rows[i] = buf.data() + static_cast<std::size_t>(3) * w * i;
  if (!read_rows(r, rows)) throw std::runtime_error("failed to decode PNG: " + path);

  ImageF img(3, static_cast<int>(h), static_cast<int>(w));
  for (std::size_t p = 0; p < static_cast<std::size_t>(w) * h; ++p)
    for (int ch = 0; ch < 3; ++ch)
      img.m(ch, static_cast<Eigen::Index>(p)) = static_cast<float>(buf[3 * p + ch]) / 127.5f - 1.0f;
  return img;
}

SegMap read_segmentation(const std::string& path) {
  PngReader r(path);
  if (!read_header(r)) throw std::runtime_error("failed to parse PNG header: " + path);

  const png_uint_32 w = png_get_image_width(r.png, r.info);
  const png_uint_32 h = png_get_image_height(r.png, r.info);
  const int color = png_get_color_type(r.png, r.info);
  const int depth = png_get_bit_depth(r.png, r.info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8)
    throw std::runtime_error("segmentation PNG is not 8-bit grayscale: " + path);

  std::vector<png_byte> buf(static_cast<std::size_t>(w) * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 i = 0; i < h; ++i) rows[i] = buf.data() + static_cast<std::size_t>(w) * i;
  if (!read_rows(r, rows)) throw std::runtime_error("failed to decode PNG: " + path);

  SegMap seg(static_cast<int>(h), static_cast<int>(w));
  for (png_uint_32 rr = 0; rr < h; ++rr)
    for (png_uint_32 cc = 0; cc < w; ++cc)
      seg(static_cast<int>(rr), static_cast<int>(cc)) = buf[static_cast<std::size_t>(w) * rr + cc];
  return seg;
}

namespace {

png_byte quantize(float v) {
  const float x = std::round((v + 1.0f) * 127.5f);
  return static_cast<png_byte>(x < 0.0f ? 0 : (x > 255.0f ? 255 : x));
}

void write_png(const std::string& path, png_uint_32 w, png_uint_32 h, int format,
               const std::vector<png_byte>& buf) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = w;
  img.height = h;
  img.format = static_cast<png_uint_32>(format);
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw std::runtime_error(std::string("failed to write PNG: ") + path + ": " + img.message);
}

}  // namespace

void write_image_rgb(const std::string& path, const ImageF& img) {
  require(img.channels == 3, "write_image_rgb: expected 3 channels, got " + img.shape_str());
  std::vector<png_byte> buf(static_cast<std::size_t>(3) * img.pixels());
  for (int p = 0; p < img.pixels(); ++p)
    for (int ch = 0; ch < 3; ++ch)
      buf[static_cast<std::size_t>(3) * p + static_cast<std::size_t>(ch)] = quantize(img.m(ch, p));
  write_png(path, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
            PNG_FORMAT_RGB, buf);
}

void write_segmentation(const std::string& path, const SegMap& seg) {
  std::vector<png_byte> buf(static_cast<std::size_t>(seg.size()));
  for (int r = 0; r < seg.rows(); ++r)
    for (int c = 0; c < seg.cols(); ++c) {
      const int v = seg(r, c);
      require(v >= 0 && v <= 255, "write_segmentation: label out of byte range: " + std::to_string(v));
      buf[static_cast<std::size_t>(r) * static_cast<std::size_t>(seg.cols()) +
          static_cast<std::size_t>(c)] = static_cast<png_byte>(v);
    }
  write_png(path, static_cast<png_uint_32>(seg.cols()), static_cast<png_uint_32>(seg.rows()),
            PNG_FORMAT_GRAY, buf);
}

}  // namespace mango
