#include "advlogo/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "advlogo/errors.hpp"
#include "advlogo/random.hpp"

namespace advlogo {

namespace {

constexpr double kNear = 1e-3;

double edge(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double px, double py) {
  return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

}  // namespace

void Camera::validate() const {
  if (!(distance > 0)) throw DomainError("camera distance must be positive");
  if (!(fov_deg > 0 && fov_deg < 180)) throw DomainError("camera fov must lie in (0, 180)");
  if (image_size < 16) throw DomainError("camera image_size must be >= 16");
}

double Camera::focal_pixels() const {
  return 0.5 * image_size / std::tan(0.5 * fov_deg * std::numbers::pi / 180.0);
}

Eigen::Matrix3Xd project_vertices(const TriMesh& mesh, const Camera& camera) {
  camera.validate();
  const auto xf = model_to_world<double>(camera);
  const double f = camera.focal_pixels();
  const double half = 0.5 * camera.image_size;
  Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(mesh.vertices.size()));
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Eigen::Vector3d p = xf * mesh.vertices[i];
    const double z = camera.distance - p.z();
    const auto col = static_cast<Eigen::Index>(i);
    out(2, col) = z;
    if (z > kNear) {
      out(0, col) = half + f * p.x() / z;
      out(1, col) = half - f * p.y() / z;
    } else {
      out(0, col) = out(1, col) = 0.0;
    }
  }
  return out;
}

Rasterization rasterize(const TriMesh& mesh, const Camera& camera) {
  const int size = camera.image_size;
  const Eigen::Matrix3Xd screen = project_vertices(mesh, camera);
  Rasterization r;
  r.size = size;
  const Eigen::Index n = Eigen::Index{size} * size;
  r.coverage = Mask::Constant(n, false);
  r.depth = Eigen::ArrayXd::Constant(n, std::numeric_limits<double>::infinity());
  r.face_id = Eigen::ArrayXi::Constant(n, -1);

  for (int fi = 0; fi < mesh.face_count(); ++fi) {
    const Eigen::Vector3i& f = mesh.faces[static_cast<std::size_t>(fi)];
    const Eigen::Vector3d z(screen(2, f[0]), screen(2, f[1]), screen(2, f[2]));
    if ((z.array() <= kNear).any()) continue;
    const Eigen::Vector2d v0 = screen.col(f[0]).head<2>();
    const Eigen::Vector2d v1 = screen.col(f[1]).head<2>();
    const Eigen::Vector2d v2 = screen.col(f[2]).head<2>();
    const double area = edge(v0, v1, v2.x(), v2.y());
    if (area == 0.0) continue;

    const double min_x = std::min({v0.x(), v1.x(), v2.x()});
    const double max_x = std::max({v0.x(), v1.x(), v2.x()});
    const double min_y = std::min({v0.y(), v1.y(), v2.y()});
    const double max_y = std::max({v0.y(), v1.y(), v2.y()});
    const int x_lo = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
    const int x_hi = std::min(size - 1, static_cast<int>(std::ceil(max_x - 0.5)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
    const int y_hi = std::min(size - 1, static_cast<int>(std::ceil(max_y - 0.5)));

    for (int y = y_lo; y <= y_hi; ++y) {
      const double py = y + 0.5;
      for (int x = x_lo; x <= x_hi; ++x) {
        const double px = x + 0.5;
        const double w0 = edge(v1, v2, px, py);
        const double w1 = edge(v2, v0, px, py);
        const double w2 = edge(v0, v1, px, py);
        const bool inside = area > 0 ? (w0 >= 0 && w1 >= 0 && w2 >= 0)
                                     : (w0 <= 0 && w1 <= 0 && w2 <= 0);
        if (!inside) continue;
        // Perspective-correct depth: interpolate 1/z in screen space.
        const double inv_z = (w0 / z[0] + w1 / z[1] + w2 / z[2]) / area;
        const double depth = 1.0 / inv_z;
        const Eigen::Index i = Eigen::Index{y} * size + x;
        if (depth < r.depth[i]) {
          r.depth[i] = depth;
          r.face_id[i] = fi;
          r.coverage[i] = true;
        }
      }
    }
  }
  return r;
}

RenderOutput shade(const Rasterization& raster, const TriMesh& mesh, const LogoSubmesh& logo) {
  if (logo.host_face_count != mesh.face_count()) {
    throw DimensionError("shade: logo submesh belongs to a different mesh");
  }
  RenderOutput out;
  out.rgb = Image(raster.size, raster.size);
  out.coverage = raster.coverage;
  out.depth = raster.depth;
  out.face_id = raster.face_id;
  out.logo_mask = Mask::Constant(raster.coverage.size(), false);
  for (Eigen::Index i = 0; i < raster.coverage.size(); ++i) {
    const int f = raster.face_id[i];
    if (f < 0) continue;
    out.rgb.rgb.row(i) =
        mesh.face_textures[static_cast<std::size_t>(f)].centroid_color().transpose().array();
    out.logo_mask[i] = logo.contains(f);
  }
  return out;
}

RenderOutput render(const TriMesh& mesh, const LogoSubmesh& logo, const Camera& camera) {
  return shade(rasterize(mesh, camera), mesh, logo);
}

CubeGradients render_backward(const Image& out_grad, const RenderOutput& output,
                              const LogoSubmesh& logo) {
  if (!out_grad.same_size(output.rgb)) throw DimensionError("render_backward: gradient size mismatch");
  CubeGradients grads(logo.host_face_count);
  constexpr auto central = TextureCube::central_samples();
  for (Eigen::Index i = 0; i < output.face_id.size(); ++i) {
    const int f = output.face_id[i];
    if (f < 0) continue;
    if (f >= logo.host_face_count) throw IndexError("render_backward: face id beyond host mesh");
    const Eigen::Array<double, 1, 3> g = out_grad.rgb.row(i) / 8.0;
    auto block = grads.face_block(f);
    for (int s : central) block.row(s) += g;
  }
  return grads;
}

Image composite(const RenderOutput& person, const Image& background) {
  if (!background.same_size(person.rgb)) throw DimensionError("composite: background size mismatch");
  Image out = background;
  for (Eigen::Index i = 0; i < out.pixels(); ++i) {
    if (person.coverage[i]) out.rgb.row(i) = person.rgb.rgb.row(i);
  }
  return out;
}

Image composite_backward(const RenderOutput& person, const Image& out_grad) {
  if (!out_grad.same_size(person.rgb)) throw DimensionError("composite_backward: size mismatch");
  Image g(out_grad.width, out_grad.height);
  for (Eigen::Index i = 0; i < g.pixels(); ++i) {
    if (person.coverage[i]) g.rgb.row(i) = out_grad.rgb.row(i);
  }
  return g;
}

std::optional<Box> person_rect(const RenderOutput& output) {
  const int size = output.size();
  int x0 = size, x1 = -1, y0 = size, y1 = -1;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (!output.coverage[Eigen::Index{y} * size + x]) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return std::nullopt;
  const double s = size;
  return Box{(x0 + x1 + 1) / (2 * s), (y0 + y1 + 1) / (2 * s), (x1 + 1 - x0) / s, (y1 + 1 - y0) / s};
}

AugmentParams AugmentParams::identity(int width, int height) {
  AugmentParams p;
  p.noise = Eigen::ArrayX3d::Zero(Eigen::Index{width} * height, 3);
  return p;
}

AugmentParams AugmentParams::draw(std::uint64_t seed, int width, int height) {
  Rng rng(seed);
  AugmentParams p;
  p.seed = seed;
  p.contrast = rng.uniform(0.0, 1.0);
  p.brightness = rng.uniform(0.0, 1.0);
  p.noise.resize(Eigen::Index{width} * height, 3);
  for (Eigen::Index c = 0; c < 3; ++c) {
    for (Eigen::Index i = 0; i < p.noise.rows(); ++i) p.noise(i, c) = rng.uniform(-0.1, 0.1);
  }
  return p;
}

void AugmentParams::validate(int width, int height) const {
  if (!(contrast >= 0 && contrast <= 1) || !(brightness >= 0 && brightness <= 1)) {
    throw DomainError("augmentation contrast/brightness outside [0,1]");
  }
  if (noise.rows() != Eigen::Index{width} * height) throw DimensionError("augmentation noise size");
  if ((noise.abs() > 0.1).any()) throw DomainError("augmentation noise outside [-0.1, 0.1]");
}

LogoTexture augment_logo_texture(const LogoTexture& texture, const AugmentParams& params) {
  params.validate(texture.width(), texture.height());
  LogoTexture out = texture;
  for (Eigen::Index i = 0; i < texture.image.pixels(); ++i) {
    if (!texture.mask[i]) continue;
    out.image.rgb.row(i) = (params.contrast * texture.image.rgb.row(i) + params.brightness +
                            params.noise.row(i))
                               .max(0.0)
                               .min(1.0);
  }
  return out;
}

Image augment_backward(const LogoTexture& texture, const AugmentParams& params,
                       const Image& out_grad) {
  if (!out_grad.same_size(texture.image)) throw DimensionError("augment_backward: size mismatch");
  Image g = out_grad;
  for (Eigen::Index i = 0; i < g.pixels(); ++i) {
    if (!texture.mask[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double pre =
          params.contrast * texture.image.rgb(i, c) + params.brightness + params.noise(i, c);
      g.rgb(i, c) = (pre > 0.0 && pre < 1.0) ? params.contrast * out_grad.rgb(i, c) : 0.0;
    }
  }
  return g;
}

std::vector<Camera> sample_views(int lo_deg, int hi_deg, int step, const Camera& base) {
  if (lo_deg > hi_deg || step < 1) throw DomainError("sample_views: need lo <= hi and step >= 1");
  std::vector<Camera> views;
  for (int a = lo_deg; a <= hi_deg; a += step) {
    Camera c = base;
    c.azimuth_deg = a;
    views.push_back(c);
  }
  return views;
}

}  // namespace advlogo
