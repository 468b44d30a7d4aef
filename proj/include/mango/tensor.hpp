#pragma once

// CHW image/feature tensor backed by a single Eigen matrix of shape
// channels x (height*width), pixel index = row*width + col. Keeping the
// spatial axes flattened lets convolution, normalization and the losses run
// as plain GEMM / columnwise reductions.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mango {

template <typename Scalar>
struct Tensor {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  int channels = 0;
  int height = 0;
  int width = 0;
  Mat m;  // channels x (height*width)

  Tensor() = default;
  Tensor(int c, int h, int w) : channels(c), height(h), width(w), m(Mat::Zero(c, h * w)) {
    if (c <= 0 || h <= 0 || w <= 0) throw std::invalid_argument("Tensor: non-positive shape");
  }

  static Tensor zeros(int c, int h, int w) { return Tensor(c, h, w); }

  static Tensor constant(int c, int h, int w, Scalar v) {
    Tensor t(c, h, w);
    t.m.setConstant(v);
    return t;
  }

  int pixels() const { return height * width; }
  long long numel() const { return static_cast<long long>(channels) * pixels(); }

  Scalar& at(int c, int r, int col) { return m(c, r * width + col); }
  Scalar at(int c, int r, int col) const { return m(c, r * width + col); }

  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  std::string shape_str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }

  template <typename S2>
  Tensor<S2> cast() const {
    Tensor<S2> t;
    t.channels = channels;
    t.height = height;
    t.width = width;
    t.m = m.template cast<S2>();
    return t;
  }
};

using ImageF = Tensor<float>;
using SegMap = Eigen::MatrixXi;  // height x width, integer class labels

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

}  // namespace mango
