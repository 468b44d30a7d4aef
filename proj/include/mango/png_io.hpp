#pragma once

// PNG codec boundary (libpng). RGB images map byte 0..255 to [-1, 1];
// segmentation maps are raw 8-bit grayscale labels.

#include "mango/tensor.hpp"

#include <string>

namespace mango {

// Reads any 8/16-bit PNG as RGB (palette expanded, alpha dropped, gray
// replicated). Values scaled to [-1, 1].
ImageF read_image_rgb(const std::string& path);

// Requires an 8-bit single-channel grayscale PNG; throws otherwise.
SegMap read_segmentation(const std::string& path);

// Quantizes round((v + 1) * 127.5), clamped to [0, 255].
void write_image_rgb(const std::string& path, const ImageF& img);

// Labels must lie in [0, 255].
void write_segmentation(const std::string& path, const SegMap& seg);

}  // namespace mango
