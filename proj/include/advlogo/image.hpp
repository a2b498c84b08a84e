#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "advlogo/tensor.hpp"

namespace advlogo {

// Per-pixel boolean plane, row-major (index = y * width + x).
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

// RGB image stored as one row per pixel (row-major pixel order) and one
// column per channel, so each column is a contiguous channel plane.
struct Image {
  int width = 0;
  int height = 0;
  Eigen::ArrayX3d rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(Eigen::ArrayX3d::Zero(Eigen::Index{w} * h, 3)) {}

  static Image filled(int w, int h, const Eigen::Vector3d& color) {
    Image img(w, h);
    img.rgb.rowwise() = color.transpose().array();
    return img;
  }

  Eigen::Index pixels() const { return Eigen::Index{width} * height; }
  Eigen::Index index(int x, int y) const { return Eigen::Index{y} * width + x; }
  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
  bool in_unit_range() const {
    return rgb.isFinite().all() && (rgb >= 0.0).all() && (rgb <= 1.0).all();
  }
};

// [3, H, W] tensor view of an image and back.
Tensor to_tensor(const Image& image);
Image from_tensor(const Tensor& tensor);

// 8-bit encodings use round(255 * clamp01(v)).
std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const std::string& path, const Image& image);
Image read_png(const std::string& path);

// Grayscale masks: true pixels are written as 255; reading thresholds the
// luminance at 0.5.
void write_mask_png(const std::string& path, const Mask& mask, int width, int height);
Mask read_mask_png(const std::string& path, int* width = nullptr, int* height = nullptr);

// Largest centered square crop, then bilinear resample to size x size.
Image center_crop_resize(const Image& image, int size);

}  // namespace advlogo
