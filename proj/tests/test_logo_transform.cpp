#include <doctest.h>

#include <cmath>
#include <limits>

#include "advlogo/errors.hpp"
#include "advlogo/logo_transform.hpp"
#include "support.hpp"

using namespace advlogo;

namespace {

// Mesh of tiny triangles whose centroids are exactly the given points.
TriMesh mesh_with_centroids(const std::vector<Eigen::Vector3d>& centroids) {
  TriMesh m;
  const Eigen::Vector3d d0(-1e-3, -1e-3, 0), d1(2e-3, -1e-3, 0), d2(-1e-3, 2e-3, 0);
  for (const auto& c : centroids) {
    const int base = static_cast<int>(m.vertices.size());
    m.vertices.push_back(c + d0);
    m.vertices.push_back(c + d1);
    m.vertices.push_back(c + d2);
    m.faces.emplace_back(base, base + 1, base + 2);
  }
  m.face_textures.assign(m.faces.size(), TextureCube::filled(Eigen::Vector3d::Constant(0.5)));
  return m;
}

std::vector<int> iota_ids(int n) {
  std::vector<int> ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
  return ids;
}

Mask full_mask(int w, int h) { return Mask::Constant(Eigen::Index{w} * h, true); }

Mask disk_mask(int size, double radius) {
  Mask m(Eigen::Index{size} * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dx = x - (size - 1) / 2.0, dy = y - (size - 1) / 2.0;
      m[Eigen::Index{y} * size + x] = dx * dx + dy * dy <= radius * radius;
    }
  return m;
}

// Exhaustive nearest in-mask pixel, first index on ties.
Eigen::Index brute_nearest(const Mask& mask, int w, double px, double py) {
  Eigen::Index best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double dx = static_cast<double>(i % w) - px, dy = static_cast<double>(i / w) - py;
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

TEST_SUITE("logo_transform") {

TEST_CASE("bbox endpoints and midpoint") {
  const TriMesh m = mesh_with_centroids({{0, 0, 0}, {2, 4, 0}, {1, 2, 0}});
  const auto ids = iota_ids(3);
  const LogoSubmesh logo = extract_logo_submesh(m, ids);
  const LogoTexture tex = LogoTexture::uniform(full_mask(9, 9), 9, 9);
  const TexCoordMap map = build_2d_mapping(logo, tex);
  REQUIRE(map.frozen());
  CHECK(map.coords()[0].isApprox(Eigen::Vector2d(0, 0)));
  CHECK(map.coords()[1].isApprox(Eigen::Vector2d(1, 1)));
  CHECK(map.coords()[2].isApprox(Eigen::Vector2d(0.5, 0.5)));
  CHECK(map.pixels()[2] == 4 * 9 + 4);
}

TEST_CASE("degenerate axis maps to the middle; flip_v mirrors rows") {
  const TriMesh m = mesh_with_centroids({{0, 0, 0}, {2, 0, 0}});
  const auto ids = iota_ids(2);
  const LogoSubmesh logo = extract_logo_submesh(m, ids);
  const auto rel = relative_centroids(logo);
  CHECK(rel[0].y() == doctest::Approx(0.5));
  const TriMesh m2 = mesh_with_centroids({{0, 0, 0}, {0, 2, 0}});
  const LogoSubmesh logo2 = extract_logo_submesh(m2, ids);
  const LogoTexture tex = LogoTexture::uniform(full_mask(5, 5), 5, 5);
  const TexCoordMap flipped = build_2d_mapping(logo2, tex, ProjectionAxes{0, 1, true});
  CHECK(flipped.coords()[0].y() == doctest::Approx(1.0));
  CHECK(flipped.coords()[1].y() == doctest::Approx(0.0));
}

TEST_CASE("disk mask: out-of-mask entry clamps to the exhaustive nearest pixel") {
  const int size = 64;
  const Mask disk = disk_mask(size, 0.25 * size);
  const TriMesh m = mesh_with_centroids({{0, 0, 0}, {1, 1, 0}, {0.3, 0.8, 0}});
  const auto ids = iota_ids(3);
  const LogoSubmesh logo = extract_logo_submesh(m, ids);
  const LogoTexture tex = LogoTexture::uniform(disk, size, size);
  const TexCoordMap map = build_2d_mapping(logo, tex);
  CHECK(map.pixels()[0] == brute_nearest(disk, size, 0, 0));
  CHECK(map.pixels()[1] == brute_nearest(disk, size, size - 1, size - 1));
  CHECK(map.pixels()[2] == brute_nearest(disk, size, 0.3 * (size - 1), 0.8 * (size - 1)));
  for (std::size_t i = 0; i < map.size(); ++i) {
    CHECK(disk[map.pixels()[i]]);
    CHECK(map.coords()[i].minCoeff() >= 0);
    CHECK(map.coords()[i].maxCoeff() <= 1);
    CHECK(texture_pixel(map.coords()[i], size, size) == map.pixels()[i]);
  }
}

TEST_CASE("empty mask and frozen-map errors") {
  const TriMesh m = mesh_with_centroids({{0, 0, 0}, {1, 1, 0}});
  const auto ids = iota_ids(2);
  const LogoSubmesh logo = extract_logo_submesh(m, ids);
  LogoTexture empty{Image(4, 4), Mask::Constant(16, false)};
  CHECK_THROWS_AS(build_2d_mapping(logo, empty), DomainError);

  const LogoTexture tex = LogoTexture::uniform(full_mask(4, 4), 4, 4);
  TriMesh host = m;
  CHECK_THROWS_AS(apply_3d_mapping(tex, TexCoordMap{}, logo, host), StateError);
  const TexCoordMap map = build_2d_mapping(logo, tex);
  const LogoTexture other = LogoTexture::uniform(full_mask(5, 5), 5, 5);
  CHECK_THROWS_AS(apply_3d_mapping(other, map, logo, host), DimensionError);
  CHECK_THROWS_AS(backward_3d_mapping(map, logo, CubeGradients(7)), DimensionError);
}

TEST_CASE("rebuilding the map is bit-identical") {
  ProxyParams p;
  p.segments = 32;
  p.rings = 20;
  const PersonProxy proxy = generate_person_proxy(p);
  const LogoSubmesh logo = extract_logo_submesh(proxy.mesh, proxy.front_panel);
  const Mask mask = rasterize_shape_mask(std::string("O"), 32, 32);
  const LogoTexture tex = LogoTexture::uniform(mask, 32, 32);
  const TexCoordMap a = build_2d_mapping(logo, tex), b = build_2d_mapping(logo, tex);
  CHECK(a.coords() == b.coords());
  CHECK(a.pixels() == b.pixels());
  CHECK(a.to_csv() == b.to_csv());
  CHECK(a.to_csv().rfind("face_id,x_hat,y_hat\n", 0) == 0);
}

TEST_CASE("apply fills every cube sample; non-logo cubes untouched") {
  const TriMesh m = mesh_with_centroids({{0, 0, 0}, {1, 1, 0}, {5, 5, 5}});
  const std::vector<int> ids{0, 1};
  const LogoSubmesh logo = extract_logo_submesh(m, ids);
  LogoTexture tex = LogoTexture::uniform(full_mask(3, 3), 3, 3, Eigen::Vector3d(0.2, 0.4, 0.6));
  const TexCoordMap map = build_2d_mapping(logo, tex);
  TriMesh host = m;
  host.face_textures[2] = TextureCube::filled(Eigen::Vector3d(0.9, 0.1, 0.3));
  apply_3d_mapping(tex, map, logo, host);
  for (const auto& c : host.face_textures[0].colors) CHECK(c == Eigen::Vector3d(0.2, 0.4, 0.6));
  tex.image.rgb.setZero();
  apply_3d_mapping(tex, map, logo, host);
  for (int f : {0, 1})
    for (const auto& c : host.face_textures[static_cast<std::size_t>(f)].colors) CHECK(c.isZero());
  for (const auto& c : host.face_textures[2].colors) CHECK(c == Eigen::Vector3d(0.9, 0.1, 0.3));
}

TEST_CASE("random texture and 20-face submesh match direct lookup; linearity") {
  Rng rng(31);
  std::vector<Eigen::Vector3d> cs;
  for (int i = 0; i < 30; ++i) cs.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  const TriMesh m = mesh_with_centroids(cs);
  std::vector<int> ids;
  for (int i = 0; i < 20; ++i) ids.push_back(i + 5);
  const LogoSubmesh logo = extract_logo_submesh(m, ids);
  const Mask mask = rasterize_shape_mask(std::string("X"), 16, 16);
  LogoTexture tex{test::random_image(16, 16, rng), mask};
  const TexCoordMap map = build_2d_mapping(logo, tex);
  TriMesh host = m;
  apply_3d_mapping(tex, map, logo, host);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Eigen::Vector3d expected = tex.image.rgb.row(map.pixels()[i]).transpose().matrix();
    for (const auto& c : host.face_textures[static_cast<std::size_t>(ids[i])].colors) CHECK(c == expected);
  }
  LogoTexture doubled = tex;
  doubled.image.rgb *= 2.0;
  TriMesh host2 = m;
  apply_3d_mapping(doubled, map, logo, host2);
  for (int f : ids)
    for (int s = 0; s < kCubeSamples; ++s)
      CHECK(host2.face_textures[f].colors[s] == 2.0 * host.face_textures[f].colors[s]);
}

TEST_CASE("backward accumulates faces sharing a pixel; zero in gives zero out") {
  const TriMesh m = mesh_with_centroids({{0, 0, 0}, {0, 0, 0}});
  const auto ids = iota_ids(2);
  const LogoSubmesh logo = extract_logo_submesh(m, ids);
  const LogoTexture tex = LogoTexture::uniform(full_mask(4, 4), 4, 4);
  const TexCoordMap map = build_2d_mapping(logo, tex);
  REQUIRE(map.pixels()[0] == map.pixels()[1]);
  CubeGradients g(2);
  g.face_block(0)(0, 0) = 0.25;
  g.face_block(0)(10, 0) = 0.75;
  g.face_block(1)(63, 0) = 1.0;
  const Image out = backward_3d_mapping(map, logo, g);
  CHECK(out.rgb(map.pixels()[0], 0) == doctest::Approx(2.0));
  CHECK(out.rgb.col(1).isZero());
  CHECK(backward_3d_mapping(map, logo, CubeGradients(2)).rgb.isZero());
}

TEST_CASE("glyph masks") {
  for (const auto& g : builtin_glyphs()) {
    const Mask m = rasterize_shape_mask(g, 64, 64);
    CHECK(m.count() > 0);
  }
  CHECK(rasterize_shape_mask(std::string("rect"), 16, 12).all());
  const Mask h = rasterize_shape_mask(std::string("H"), 64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) CHECK(h[y * 64 + x] == h[y * 64 + (63 - x)]);

  Rng rng(5);
  Bitmap bmp(12, 10);
  for (Eigen::Index i = 0; i < bmp.size(); ++i) bmp.data()[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
  bmp(0, 0) = 1.0;
  const Mask m = rasterize_shape_mask(bmp, 10, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 10; ++x) CHECK(m[y * 10 + x] == (bmp(y, x) >= 0.5));
  CHECK_THROWS_AS(rasterize_shape_mask(Bitmap::Zero(10, 10), 10, 10), DomainError);
  CHECK_THROWS_AS(rasterize_shape_mask(std::string("nope"), 16, 16), DomainError);
}

TEST_CASE("face selection under a mask keeps only faces sampling mask pixels") {
  ProxyParams p;
  p.segments = 48;
  p.rings = 36;
  const PersonProxy proxy = generate_person_proxy(p);
  const Mask mask = rasterize_shape_mask(std::string("H"), 32, 32);
  const ProjectionAxes axes{0, 1, true};
  const auto faces = select_faces_under_mask(proxy.mesh, proxy.front_panel, mask, 32, 32, axes);
  CHECK(faces.size() > 20);
  CHECK(faces.size() < proxy.front_panel.size());
  for (int f : faces) CHECK(std::find(proxy.front_panel.begin(), proxy.front_panel.end(), f) != proxy.front_panel.end());
}

}  // TEST_SUITE
