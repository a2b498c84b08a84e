#include "advlogo/logo_transform.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "advlogo/errors.hpp"

namespace advlogo {

LogoTexture LogoTexture::uniform(const Mask& mask, int width, int height,
                                 const Eigen::Vector3d& color) {
  LogoTexture t{Image::filled(width, height, color), mask};
  t.validate();
  return t;
}

void LogoTexture::validate() const {
  if (mask.size() != image.pixels()) throw DimensionError("logo texture: mask/image size mismatch");
  if (!mask.any()) throw DomainError("logo texture: mask has no pixels");
  if (!image.in_unit_range()) throw DomainError("logo texture: pixel outside [0,1]");
}

std::string TexCoordMap::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "face_id,x_hat,y_hat\n";
  for (std::size_t i = 0; i < face_ids_.size(); ++i) {
    os << face_ids_[i] << ',' << coords_[i].x() << ',' << coords_[i].y() << '\n';
  }
  return os.str();
}

Eigen::Index texture_pixel(const Eigen::Vector2d& coord, int width, int height) {
  const auto px = static_cast<Eigen::Index>(std::lround(coord.x() * (width - 1)));
  const auto py = static_cast<Eigen::Index>(std::lround(coord.y() * (height - 1)));
  return py * width + px;
}

std::vector<Eigen::Vector3d> relative_centroids(const LogoSubmesh& logo) {
  const Eigen::Vector3d lo = logo.bbox.min();
  const Eigen::Vector3d extent = logo.bbox.max() - lo;
  std::vector<Eigen::Vector3d> rel;
  rel.reserve(logo.centroids.size());
  for (const auto& c : logo.centroids) {
    Eigen::Vector3d r;
    for (int k = 0; k < 3; ++k) r[k] = extent[k] > 0 ? std::clamp((c[k] - lo[k]) / extent[k], 0.0, 1.0) : 0.5;
    rel.push_back(r);
  }
  return rel;
}

Eigen::Index nearest_mask_pixel(const Mask& mask, int width, int height, double px, double py) {
  Eigen::Index best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int y = 0; y < height; ++y) {
    const double dy = y - py;
    for (int x = 0; x < width; ++x) {
      const Eigen::Index i = Eigen::Index{y} * width + x;
      if (!mask[i]) continue;
      const double dx = x - px;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
  }
  if (best < 0) throw DomainError("nearest_mask_pixel: empty mask");
  return best;
}

TexCoordMap build_2d_mapping(const LogoSubmesh& logo, const LogoTexture& texture,
                             ProjectionAxes axes) {
  if (logo.face_ids.empty()) throw DomainError("build_2d_mapping: empty logo submesh");
  if (texture.mask.size() != texture.image.pixels()) throw DimensionError("build_2d_mapping: mask size");
  if (!texture.mask.any()) throw DomainError("build_2d_mapping: empty mask");
  if (axes.u_axis < 0 || axes.u_axis > 2 || axes.v_axis < 0 || axes.v_axis > 2 ||
      axes.u_axis == axes.v_axis) {
    throw DomainError("build_2d_mapping: invalid projection axes");
  }
  const int w = texture.width();
  const int h = texture.height();
  const auto rel = relative_centroids(logo);

  TexCoordMap map;
  map.width_ = w;
  map.height_ = h;
  map.face_ids_ = logo.face_ids;
  map.coords_.reserve(rel.size());
  map.pixels_.reserve(rel.size());
  for (const auto& r : rel) {
    Eigen::Vector2d coord(r[axes.u_axis], axes.flip_v ? 1.0 - r[axes.v_axis] : r[axes.v_axis]);
    Eigen::Index pixel = texture_pixel(coord, w, h);
    if (!texture.mask[pixel]) {
      pixel = nearest_mask_pixel(texture.mask, w, h, coord.x() * (w - 1), coord.y() * (h - 1));
      const double px = static_cast<double>(pixel % w);
      const double py = static_cast<double>(pixel / w);
      coord = Eigen::Vector2d(w > 1 ? px / (w - 1) : 0.5, h > 1 ? py / (h - 1) : 0.5);
    }
    map.coords_.push_back(coord);
    map.pixels_.push_back(pixel);
  }
  map.frozen_ = true;
  return map;
}

namespace {

void check_map(const TexCoordMap& map, const LogoSubmesh& logo, int face_count) {
  if (!map.frozen()) throw StateError("texture coordinate map is not frozen");
  if (map.face_ids() != logo.face_ids || logo.host_face_count != face_count) {
    throw StateError("texture coordinate map was built for a different logo submesh");
  }
}

}  // namespace

void apply_3d_mapping(const LogoTexture& texture, const TexCoordMap& map, const LogoSubmesh& logo,
                      TriMesh& host) {
  check_map(map, logo, host.face_count());
  if (texture.width() != map.texture_width() || texture.height() != map.texture_height()) {
    throw DimensionError("apply_3d_mapping: texture size differs from map");
  }
  for (std::size_t i = 0; i < map.size(); ++i) {
    const Eigen::Vector3d color = texture.image.rgb.row(map.pixels()[i]).transpose().matrix();
    host.face_textures[static_cast<std::size_t>(map.face_ids()[i])] = TextureCube::filled(color);
  }
}

Image backward_3d_mapping(const TexCoordMap& map, const LogoSubmesh& logo,
                          const CubeGradients& cube_grads) {
  if (cube_grads.face_count != logo.host_face_count ||
      cube_grads.samples.rows() != Eigen::Index{cube_grads.face_count} * kCubeSamples) {
    throw DimensionError("backward_3d_mapping: cube gradient shape mismatch");
  }
  check_map(map, logo, cube_grads.face_count);
  Image grad(map.texture_width(), map.texture_height());
  for (std::size_t i = 0; i < map.size(); ++i) {
    grad.rgb.row(map.pixels()[i]) += cube_grads.face_sum(map.face_ids()[i]).transpose().array();
  }
  return grad;
}

std::vector<int> select_faces_under_mask(const TriMesh& mesh, std::span<const int> candidates,
                                         const Mask& mask, int width, int height,
                                         ProjectionAxes axes) {
  if (mask.size() != Eigen::Index{width} * height) throw DimensionError("select_faces_under_mask: mask size");
  const LogoSubmesh panel = extract_logo_submesh(mesh, candidates);
  const auto rel = relative_centroids(panel);
  std::vector<int> selected;
  for (std::size_t i = 0; i < rel.size(); ++i) {
    const Eigen::Vector2d coord(rel[i][axes.u_axis],
                                axes.flip_v ? 1.0 - rel[i][axes.v_axis] : rel[i][axes.v_axis]);
    if (mask[texture_pixel(coord, width, height)]) selected.push_back(panel.face_ids[i]);
  }
  if (selected.empty()) throw DomainError("no panel face falls inside the logo mask");
  return selected;
}

}  // namespace advlogo
