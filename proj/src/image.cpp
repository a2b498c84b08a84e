#include "advlogo/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <png.h>

#include "advlogo/errors.hpp"

namespace advlogo {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

std::vector<std::uint8_t> interleave(const Image& image) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(image.pixels()) * 3);
  for (Eigen::Index i = 0; i < image.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) bytes[static_cast<std::size_t>(i * 3 + c)] = to_byte(image.rgb(i, c));
  }
  return bytes;
}

std::vector<std::uint8_t> encode(const std::vector<std::uint8_t>& pixels, int width, int height,
                                 png_uint_32 format) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(width);
  png.height = static_cast<png_uint_32>(height);
  png.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("png encode: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw IoError(std::string("png encode: ") + png.message);
  }
  out.resize(size);
  return out;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path);
}

std::vector<std::uint8_t> decode(const std::string& path, png_uint_32 format, int& width,
                                 int& height) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("cannot open " + path);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw ParseError("png read " + path + ": " + png.message);
  }
  png.format = format;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ParseError("png decode " + path + ": " + png.message);
  }
  width = static_cast<int>(png.width);
  height = static_cast<int>(png.height);
  return pixels;
}

}  // namespace

Tensor to_tensor(const Image& image) {
  Tensor t({3, image.height, image.width});
  // Column-major rgb: each channel plane is already contiguous.
  t.data() = Eigen::Map<const Eigen::ArrayXd>(image.rgb.data(), image.rgb.size());
  return t;
}

Image from_tensor(const Tensor& tensor) {
  if (tensor.rank() != 3 || tensor.dim(0) != 3) throw DimensionError("from_tensor: expected [3,H,W]");
  Image img(static_cast<int>(tensor.dim(2)), static_cast<int>(tensor.dim(1)));
  Eigen::Map<Eigen::ArrayXd>(img.rgb.data(), img.rgb.size()) = tensor.data();
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  return encode(interleave(image), image.width, image.height, PNG_FORMAT_RGB);
}

void write_png(const std::string& path, const Image& image) {
  write_bytes(path, encode_png(image));
}

Image read_png(const std::string& path) {
  int w = 0, h = 0;
  const auto bytes = decode(path, PNG_FORMAT_RGB, w, h);
  Image img(w, h);
  for (Eigen::Index i = 0; i < img.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) img.rgb(i, c) = bytes[static_cast<std::size_t>(i * 3 + c)] / 255.0;
  }
  return img;
}

void write_mask_png(const std::string& path, const Mask& mask, int width, int height) {
  if (mask.size() != Eigen::Index{width} * height) throw DimensionError("mask size mismatch");
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(mask.size()));
  for (Eigen::Index i = 0; i < mask.size(); ++i) bytes[static_cast<std::size_t>(i)] = mask[i] ? 255 : 0;
  write_bytes(path, encode(bytes, width, height, PNG_FORMAT_GRAY));
}

Mask read_mask_png(const std::string& path, int* width, int* height) {
  int w = 0, h = 0;
  const auto bytes = decode(path, PNG_FORMAT_GRAY, w, h);
  Mask mask(Eigen::Index{w} * h);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask[i] = bytes[static_cast<std::size_t>(i)] / 255.0 >= 0.5;
  }
  if (width) *width = w;
  if (height) *height = h;
  return mask;
}

Image center_crop_resize(const Image& image, int size) {
  if (size < 1 || image.width < 1 || image.height < 1) throw DomainError("center_crop_resize: empty");
  const int side = std::min(image.width, image.height);
  const double x0 = (image.width - side) / 2.0;
  const double y0 = (image.height - side) / 2.0;
  const double scale = static_cast<double>(side) / size;
  Image out(size, size);
  auto sample = [&](int x, int y) {
    x = std::clamp(x, 0, image.width - 1);
    y = std::clamp(y, 0, image.height - 1);
    return image.rgb.row(image.index(x, y));
  };
  for (int y = 0; y < size; ++y) {
    const double sy = y0 + (y + 0.5) * scale - 0.5;
    const int iy = static_cast<int>(std::floor(sy));
    const double fy = sy - iy;
    for (int x = 0; x < size; ++x) {
      const double sx = x0 + (x + 0.5) * scale - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      const double fx = sx - ix;
      out.rgb.row(out.index(x, y)) =
          (1 - fy) * ((1 - fx) * sample(ix, iy) + fx * sample(ix + 1, iy)) +
          fy * ((1 - fx) * sample(ix, iy + 1) + fx * sample(ix + 1, iy + 1));
    }
  }
  return out;
}

}  // namespace advlogo
