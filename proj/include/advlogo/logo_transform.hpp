#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "advlogo/image.hpp"
#include "advlogo/mesh.hpp"

namespace advlogo {

// The optimisable logo image plus the binary contour it is valid inside.
struct LogoTexture {
  Image image;
  Mask mask;

  int width() const { return image.width; }
  int height() const { return image.height; }

  static LogoTexture uniform(const Mask& mask, int width, int height,
                             const Eigen::Vector3d& color = Eigen::Vector3d::Constant(0.5));

  // Mask non-empty and sized like the image, pixels in [0,1].
  void validate() const;
};

// Which centroid axes become (x_hat, y_hat). With flip_v the second
// coordinate is mirrored so that +y in model space maps to texture row 0.
struct ProjectionAxes {
  int u_axis = 0;
  int v_axis = 1;
  bool flip_v = false;
};

// Per-logo-face texture coordinates in [0,1]^2. Only build_2d_mapping
// produces a frozen map; a default-constructed map is unfrozen and rejected
// by apply/backward.
class TexCoordMap {
 public:
  TexCoordMap() = default;

  bool frozen() const { return frozen_; }
  int texture_width() const { return width_; }
  int texture_height() const { return height_; }
  const std::vector<int>& face_ids() const { return face_ids_; }
  const std::vector<Eigen::Vector2d>& coords() const { return coords_; }
  // Row-major texture pixel sampled by each entry.
  const std::vector<Eigen::Index>& pixels() const { return pixels_; }
  std::size_t size() const { return face_ids_.size(); }

  // "face_id,x_hat,y_hat" rows with a header line.
  std::string to_csv() const;

 private:
  friend TexCoordMap build_2d_mapping(const LogoSubmesh&, const LogoTexture&, ProjectionAxes);

  std::vector<int> face_ids_;
  std::vector<Eigen::Vector2d> coords_;
  std::vector<Eigen::Index> pixels_;
  int width_ = 0;
  int height_ = 0;
  bool frozen_ = false;
};

// Nearest-pixel address of a texture coordinate: (round(x (w-1)), round(y (h-1))).
Eigen::Index texture_pixel(const Eigen::Vector2d& coord, int width, int height);

// Relative position of each centroid inside the logo bbox; a degenerate axis
// maps to 0.5.
std::vector<Eigen::Vector3d> relative_centroids(const LogoSubmesh& logo);

// Nearest in-mask pixel to the continuous pixel-space point (px, py); ties go
// to the lowest row-major index.
Eigen::Index nearest_mask_pixel(const Mask& mask, int width, int height, double px, double py);

TexCoordMap build_2d_mapping(const LogoSubmesh& logo, const LogoTexture& texture,
                             ProjectionAxes axes = {});

// Fills the cube of every logo face with its sampled texture colour.
void apply_3d_mapping(const LogoTexture& texture, const TexCoordMap& map, const LogoSubmesh& logo,
                      TriMesh& host);

// Transpose of apply_3d_mapping: scatter-adds each face's summed cube gradient
// into its source pixel. Returns an image-shaped gradient.
Image backward_3d_mapping(const TexCoordMap& map, const LogoSubmesh& logo,
                          const CubeGradients& cube_grads);

// Built-in glyphs: "G", "O", "C", "X", "T", "H", "raindrop", "twitter", "rect".
std::vector<std::string> builtin_glyphs();

// Grayscale bitmap, rows = height; thresholded at 0.5.
using Bitmap = Eigen::ArrayXXd;
using ShapeSource = std::variant<std::string, Bitmap>;

Mask rasterize_shape_mask(const ShapeSource& shape, int width, int height);

// Subset of `candidates` whose bbox-relative position samples an in-mask
// pixel: carves the logo contour out of a host panel.
std::vector<int> select_faces_under_mask(const TriMesh& mesh, std::span<const int> candidates,
                                         const Mask& mask, int width, int height,
                                         ProjectionAxes axes = {});

}  // namespace advlogo
