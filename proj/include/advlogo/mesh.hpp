#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace advlogo {

inline constexpr int kCubeSize = 4;
inline constexpr int kCubeSamples = kCubeSize * kCubeSize * kCubeSize;

// q x q x q block of RGB samples attached to one face. Sample (i, j, k) lives
// at index (i * q + j) * q + k.
struct TextureCube {
  std::array<Eigen::Vector3d, kCubeSamples> colors;

  static TextureCube filled(const Eigen::Vector3d& color) {
    TextureCube cube;
    cube.colors.fill(color);
    return cube;
  }

  // Indices of the 2x2x2 samples surrounding the cube centre.
  static constexpr std::array<int, 8> central_samples() {
    constexpr int lo = kCubeSize / 2 - 1;
    std::array<int, 8> idx{};
    int n = 0;
    for (int i = lo; i <= lo + 1; ++i)
      for (int j = lo; j <= lo + 1; ++j)
        for (int k = lo; k <= lo + 1; ++k) idx[n++] = (i * kCubeSize + j) * kCubeSize + k;
    return idx;
  }

  // Trilinear sample at the cube centroid.
  Eigen::Vector3d centroid_color() const {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    for (int i : central_samples()) sum += colors[static_cast<std::size_t>(i)];
    return sum / 8.0;
  }
};

// Gradient with respect to every cube sample of every face; rows are
// face * kCubeSamples + sample, columns RGB.
struct CubeGradients {
  int face_count = 0;
  Eigen::ArrayX3d samples;

  CubeGradients() = default;
  explicit CubeGradients(int faces)
      : face_count(faces), samples(Eigen::ArrayX3d::Zero(Eigen::Index{faces} * kCubeSamples, 3)) {}

  auto face_block(int face) { return samples.middleRows(Eigen::Index{face} * kCubeSamples, kCubeSamples); }
  auto face_block(int face) const {
    return samples.middleRows(Eigen::Index{face} * kCubeSamples, kCubeSamples);
  }

  // Sum over the face's q^3 samples, i.e. the gradient of the face colour.
  Eigen::Vector3d face_sum(int face) const { return face_block(face).colwise().sum().transpose().matrix(); }
};

struct TriMesh {
  std::string name;
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> faces;
  std::vector<TextureCube> face_textures;

  int face_count() const { return static_cast<int>(faces.size()); }

  Eigen::Vector3d face_centroid(int face) const {
    const Eigen::Vector3i& f = faces.at(static_cast<std::size_t>(face));
    return (vertices[f[0]] + vertices[f[1]] + vertices[f[2]]) / 3.0;
  }

  // Throws when an invariant (>= 1 face, indices in range, one cube per
  // face) is broken.
  void validate() const;
};

// A face subset of a host mesh selected as the 3D logo.
struct LogoSubmesh {
  std::string host_name;
  int host_face_count = 0;
  std::vector<int> face_ids;
  std::vector<Eigen::Vector3d> centroids;
  Eigen::AlignedBox3d bbox;
  // One flag per host face.
  std::vector<bool> is_logo_face;

  bool contains(int face) const {
    return face >= 0 && face < host_face_count && is_logo_face[static_cast<std::size_t>(face)];
  }
};

struct SceneMesh {
  TriMesh mesh;
  LogoSubmesh logo;
};

// Meshes trained jointly.
struct MeshScene {
  std::vector<SceneMesh> meshes;
};

TriMesh parse_obj(std::string_view text, std::string name = {});
TriMesh load_obj(const std::string& path);
std::string write_obj(const TriMesh& mesh);
void save_obj(const std::string& path, const TriMesh& mesh);

// Duplicate ids are dropped, keeping the first occurrence.
LogoSubmesh extract_logo_submesh(const TriMesh& mesh, std::span<const int> face_ids);

struct ProxyParams {
  double height = 0.75;
  double radius = 0.15;
  // Scales the z semi-axis, giving an elliptic cross-section.
  double depth_scale = 1.0;
  int segments = 8;
  int rings = 1;
  // Front panel: side faces within this angle of +z and inside the height
  // band [panel_bottom, panel_top] (fractions of height, from the bottom).
  double panel_half_angle_deg = 45.0;
  double panel_bottom = 0.25;
  double panel_top = 0.8;
  std::string name = "proxy";
};

struct PersonProxy {
  TriMesh mesh;
  std::vector<int> front_panel;
};

// Capped elliptic cylinder standing on the y axis, centred at the origin,
// with segments * 2 * rings side faces followed by segments bottom-cap and
// segments top-cap faces. Mirror-symmetric about the x = 0 plane.
PersonProxy generate_person_proxy(const ProxyParams& params);
PersonProxy generate_person_proxy(double height, double radius, int segments);

// Front-panel faces with the angular width and band height shrunk by `scale`
// about the panel centre.
std::vector<int> front_panel_faces(const ProxyParams& params, double scale = 1.0);

}  // namespace advlogo
