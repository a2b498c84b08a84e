#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "advlogo/box.hpp"
#include "advlogo/image.hpp"
#include "advlogo/logo_transform.hpp"
#include "advlogo/mesh.hpp"

namespace advlogo {

// Fixed camera on +z looking at the origin; the model is rotated about the
// vertical axis by `azimuth_deg` (positive = counterclockwise seen from
// above) and tilted by `elevation_deg`. `pan` translates the model in the
// image plane (x right, y up) and is used only for dataset synthesis.
struct Camera {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
  double distance = 2.0;
  double fov_deg = 30.0;
  int image_size = 64;
  Eigen::Vector2d pan = Eigen::Vector2d::Zero();

  void validate() const;
  double focal_pixels() const;
};

// Model-to-view transform: rotation, then pan; view depth is distance - z.
template <typename Scalar>
Eigen::Transform<Scalar, 3, Eigen::Isometry> model_to_world(const Camera& camera) {
  using Angle = Eigen::AngleAxis<Scalar>;
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  constexpr Scalar kDeg = Scalar(3.14159265358979323846) / Scalar(180);
  Eigen::Transform<Scalar, 3, Eigen::Isometry> t = Eigen::Transform<Scalar, 3, Eigen::Isometry>::Identity();
  t.translate(Vec3(Scalar(camera.pan.x()), Scalar(camera.pan.y()), Scalar(0)));
  t.rotate(Angle(Scalar(-camera.elevation_deg) * kDeg, Vec3::UnitX()));
  t.rotate(Angle(Scalar(camera.azimuth_deg) * kDeg, Vec3::UnitY()));
  return t;
}

// Screen position (x right, y down, pixels) and positive view depth for
// every vertex.
Eigen::Matrix3Xd project_vertices(const TriMesh& mesh, const Camera& camera);

// Geometry-only part of a render: visibility per pixel centre.
struct Rasterization {
  int size = 0;
  Mask coverage;
  Eigen::ArrayXd depth;    // +inf where uncovered
  Eigen::ArrayXi face_id;  // -1 where uncovered
};

struct RenderOutput {
  Image rgb;
  Mask coverage;
  Eigen::ArrayXd depth;
  Eigen::ArrayXi face_id;
  Mask logo_mask;

  int size() const { return rgb.width; }
};

// Z-buffered rasterisation at pixel centres; nearer depth wins, equal depth
// keeps the lower face index. No back-face culling; faces with a vertex
// closer than the near plane are skipped.
Rasterization rasterize(const TriMesh& mesh, const Camera& camera);

// Ambient-only shading with unit intensity: each covered pixel takes its
// face's cube colour sampled at the cube centroid.
RenderOutput shade(const Rasterization& raster, const TriMesh& mesh, const LogoSubmesh& logo);

RenderOutput render(const TriMesh& mesh, const LogoSubmesh& logo, const Camera& camera);

// Routes each covered pixel's gradient to the centroid samples of its face.
CubeGradients render_backward(const Image& out_grad, const RenderOutput& output,
                              const LogoSubmesh& logo);

Image composite(const RenderOutput& person, const Image& background);
// Gradient with respect to the rendered rgb (zero off the person).
Image composite_backward(const RenderOutput& person, const Image& out_grad);

// Normalised bounding rectangle of the coverage mask, if any.
std::optional<Box> person_rect(const RenderOutput& output);

// Logo texture augmentation: inside the mask p <- clamp01(c p + b + n).
struct AugmentParams {
  double contrast = 1.0;
  double brightness = 0.0;
  Eigen::ArrayX3d noise;  // per pixel and channel
  std::uint64_t seed = 0;

  static AugmentParams identity(int width, int height);
  // c ~ U(0,1), b ~ U(0,1), n ~ U(-0.1, 0.1).
  static AugmentParams draw(std::uint64_t seed, int width, int height);
  void validate(int width, int height) const;
};

LogoTexture augment_logo_texture(const LogoTexture& texture, const AugmentParams& params);
// Multiplies by c where the pre-clamp value was strictly inside (0,1), zero
// where clamped; outside the mask the augmentation is the identity.
Image augment_backward(const LogoTexture& texture, const AugmentParams& params,
                       const Image& out_grad);

// Cameras at lo, lo + step, ..., hi degrees sharing the base camera's other
// settings.
std::vector<Camera> sample_views(int lo_deg, int hi_deg, int step, const Camera& base = {});

}  // namespace advlogo
