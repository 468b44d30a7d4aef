#pragma once

// Image geometry: filtered resize (anti-aliased on downscale), nearest-index
// resampling shared with segmentation maps, crops, and rotations. Rotations
// by right angles are exact index permutations; arbitrary angles fall back to
// bilinear sampling with reflection padding. Both carry an adjoint so
// gradients can flow back through patch extraction.

#include "mango/tensor.hpp"

#include <cmath>
#include <vector>

namespace mango {

enum class Filter { Nearest, Bilinear, Bicubic };

namespace detail {

// Source index for nearest resampling: floor((i + 0.5) * in / out).
// Integer arithmetic, exact for all sizes.
inline int nearest_src_index(int i, int in_size, int out_size) {
  return static_cast<int>((static_cast<long long>(2 * i + 1) * in_size) / (2LL * out_size));
}

inline double triangle_kernel(double x) {
  x = std::abs(x);
  return x < 1.0 ? 1.0 - x : 0.0;
}

// Catmull-Rom cubic (a = -0.5), support 2.
inline double cubic_kernel(double x) {
  x = std::abs(x);
  if (x < 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
  if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
  return 0.0;
}

struct ResampleTap {
  int first = 0;
  std::vector<double> weights;
};

// One tap list per output index. When downscaling the kernel is stretched by
// the scale factor so it averages over the full source footprint.
inline std::vector<ResampleTap> build_taps(int in_size, int out_size, Filter f) {
  const double scale = static_cast<double>(in_size) / out_size;
  const double fscale = scale > 1.0 ? scale : 1.0;
  const double support = (f == Filter::Bicubic ? 2.0 : 1.0) * fscale;
  std::vector<ResampleTap> taps(static_cast<std::size_t>(out_size));
  for (int o = 0; o < out_size; ++o) {
    const double center = (o + 0.5) * scale - 0.5;
    int lo = static_cast<int>(std::ceil(center - support));
    int hi = static_cast<int>(std::floor(center + support));
    ResampleTap tap;
    tap.first = lo;
    tap.weights.resize(static_cast<std::size_t>(hi - lo + 1));
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double x = (i - center) / fscale;
      const double w = f == Filter::Bicubic ? cubic_kernel(x) : triangle_kernel(x);
      tap.weights[static_cast<std::size_t>(i - lo)] = w;
      sum += w;
    }
    if (sum != 0.0)
      for (double& w : tap.weights) w /= sum;
    taps[static_cast<std::size_t>(o)] = tap;
  }
  return taps;
}

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// Symmetric reflection (edge pixel repeated), applied until in range.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

}  // namespace detail

// Filtered separable resize. Edge handling: clamp.
template <typename S>
Tensor<S> resize(const Tensor<S>& t, int out_h, int out_w, Filter f) {
  require(out_h > 0 && out_w > 0, "resize: non-positive output size");
  if (f == Filter::Nearest) {
    Tensor<S> out(t.channels, out_h, out_w);
    for (int r = 0; r < out_h; ++r) {
      const int sr = detail::nearest_src_index(r, t.height, out_h);
      for (int c = 0; c < out_w; ++c) {
        const int sc = detail::nearest_src_index(c, t.width, out_w);
        out.m.col(r * out_w + c) = t.m.col(sr * t.width + sc);
      }
    }
    return out;
  }
  const auto col_taps = detail::build_taps(t.width, out_w, f);
  const auto row_taps = detail::build_taps(t.height, out_h, f);
  Tensor<S> out(t.channels, out_h, out_w);
  // horizontal pass into a temp (channels x (h * out_w)), then vertical
  typename Tensor<double>::Mat tmp(t.channels, t.height * out_w);
  for (int r = 0; r < t.height; ++r)
    for (int c = 0; c < out_w; ++c) {
      const auto& tap = col_taps[static_cast<std::size_t>(c)];
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(t.channels);
      for (std::size_t k = 0; k < tap.weights.size(); ++k) {
        const int sc = detail::clamp_index(tap.first + static_cast<int>(k), t.width);
        acc += tap.weights[k] * t.m.col(r * t.width + sc).template cast<double>();
      }
      tmp.col(r * out_w + c) = acc;
    }
  for (int r = 0; r < out_h; ++r) {
    const auto& tap = row_taps[static_cast<std::size_t>(r)];
    for (int c = 0; c < out_w; ++c) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(t.channels);
      for (std::size_t k = 0; k < tap.weights.size(); ++k) {
        const int sr = detail::clamp_index(tap.first + static_cast<int>(k), t.height);
        acc += tap.weights[k] * tmp.col(sr * out_w + c);
      }
      out.m.col(r * out_w + c) = acc.cast<S>();
    }
  }
  return out;
}

// Nearest-index label resampling: out(r,c) = src(floor((r+0.5)H/h), floor((c+0.5)W/w)).
inline SegMap downsample_segmentation(const SegMap& seg, int out_h, int out_w) {
  require(out_h > 0 && out_w > 0, "downsample_segmentation: non-positive output size");
  require(out_h <= seg.rows() && out_w <= seg.cols(),
          "downsample_segmentation: output larger than input");
  SegMap out(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    const int sr = detail::nearest_src_index(r, static_cast<int>(seg.rows()), out_h);
    for (int c = 0; c < out_w; ++c)
      out(r, c) = seg(sr, detail::nearest_src_index(c, static_cast<int>(seg.cols()), out_w));
  }
  return out;
}

template <typename S>
Tensor<S> crop(const Tensor<S>& t, int top, int left, int h, int w) {
  require(top >= 0 && left >= 0 && top + h <= t.height && left + w <= t.width,
          "crop: window outside image");
  Tensor<S> out(t.channels, h, w);
  for (int r = 0; r < h; ++r)
    out.m.middleCols(r * w, w) = t.m.middleCols((top + r) * t.width + left, w);
  return out;
}

// Adjoint of crop: accumulate a window gradient into the full-image gradient.
template <typename S>
void add_crop_grad(Tensor<S>& full, const Tensor<S>& g, int top, int left) {
  for (int r = 0; r < g.height; ++r)
    full.m.middleCols((top + r) * full.width + left, g.width) +=
        g.m.middleCols(r * g.width, g.width);
}

// Rotate by 90*k degrees counter-clockwise (exact permutation).
template <typename S>
Tensor<S> rot90(const Tensor<S>& t, int k) {
  k = ((k % 4) + 4) % 4;
  if (k == 0) return t;
  const int h = t.height, w = t.width;
  Tensor<S> out(t.channels, k == 2 ? h : w, k == 2 ? w : h);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      int sr = 0, sc = 0;
      if (k == 1) {
        sr = c;
        sc = w - 1 - r;
      } else if (k == 2) {
        sr = h - 1 - r;
        sc = w - 1 - c;
      } else {
        sr = h - 1 - c;
        sc = r;
      }
      out.m.col(r * out.width + c) = t.m.col(sr * w + sc);
    }
  return out;
}

// Rotate by an arbitrary angle (degrees, counter-clockwise) about the image
// center; bilinear sampling, reflection padding. Output has the input shape.
// Matches rot90 exactly at multiples of 90 degrees on square inputs.
template <typename S>
Tensor<S> rotate_bilinear(const Tensor<S>& t, double degrees) {
  const double th = degrees * M_PI / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double cy = 0.5 * (t.height - 1), cx = 0.5 * (t.width - 1);
  Tensor<S> out(t.channels, t.height, t.width);
  for (int r = 0; r < t.height; ++r)
    for (int c = 0; c < t.width; ++c) {
      const double xo = c - cx, yo = r - cy;
      const double xi = cs * xo - sn * yo + cx;
      const double yi = sn * xo + cs * yo + cy;
      const int x0 = static_cast<int>(std::floor(xi)), y0 = static_cast<int>(std::floor(yi));
      const double fx = xi - x0, fy = yi - y0;
      const int xs[2] = {detail::reflect_index(x0, t.width), detail::reflect_index(x0 + 1, t.width)};
      const int ys[2] = {detail::reflect_index(y0, t.height), detail::reflect_index(y0 + 1, t.height)};
      const double wgt[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(t.channels);
      acc += wgt[0] * t.m.col(ys[0] * t.width + xs[0]).template cast<double>();
      acc += wgt[1] * t.m.col(ys[0] * t.width + xs[1]).template cast<double>();
      acc += wgt[2] * t.m.col(ys[1] * t.width + xs[0]).template cast<double>();
      acc += wgt[3] * t.m.col(ys[1] * t.width + xs[1]).template cast<double>();
      out.m.col(r * t.width + c) = acc.cast<S>();
    }
  return out;
}

// Adjoint of rotate_bilinear: scatter the output gradient back through the
// same sample weights.
template <typename S>
Tensor<S> rotate_bilinear_adjoint(const Tensor<S>& gout, double degrees) {
  const double th = degrees * M_PI / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double cy = 0.5 * (gout.height - 1), cx = 0.5 * (gout.width - 1);
  Tensor<S> gin(gout.channels, gout.height, gout.width);
  for (int r = 0; r < gout.height; ++r)
    for (int c = 0; c < gout.width; ++c) {
      const double xo = c - cx, yo = r - cy;
      const double xi = cs * xo - sn * yo + cx;
      const double yi = sn * xo + cs * yo + cy;
      const int x0 = static_cast<int>(std::floor(xi)), y0 = static_cast<int>(std::floor(yi));
      const double fx = xi - x0, fy = yi - y0;
      const int xs[2] = {detail::reflect_index(x0, gout.width),
                         detail::reflect_index(x0 + 1, gout.width)};
      const int ys[2] = {detail::reflect_index(y0, gout.height),
                         detail::reflect_index(y0 + 1, gout.height)};
      const double wgt[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      const auto g = gout.m.col(r * gout.width + c);
      gin.m.col(ys[0] * gin.width + xs[0]) += (wgt[0] * g.template cast<double>()).template cast<S>();
      gin.m.col(ys[0] * gin.width + xs[1]) += (wgt[1] * g.template cast<double>()).template cast<S>();
      gin.m.col(ys[1] * gin.width + xs[0]) += (wgt[2] * g.template cast<double>()).template cast<S>();
      gin.m.col(ys[1] * gin.width + xs[1]) += (wgt[3] * g.template cast<double>()).template cast<S>();
    }
  return gin;
}

}  // namespace mango
