#include "advlogo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "advlogo/errors.hpp"
#include "advlogo/parallel.hpp"
#include "advlogo/random.hpp"

namespace advlogo {

namespace {

Eigen::Array3d random_color(Rng& rng, double lo = 0.0, double hi = 1.0) {
  const double r = rng.uniform(lo, hi);
  const double g = rng.uniform(lo, hi);
  const double b = rng.uniform(lo, hi);
  return {r, g, b};
}

void fill_rect(Image& img, double x0, double y0, double x1, double y1, const Eigen::Array3d& color) {
  const int xa = std::max(0, static_cast<int>(std::floor(x0)));
  const int xb = std::min(img.width - 1, static_cast<int>(std::ceil(x1)) - 1);
  const int ya = std::max(0, static_cast<int>(std::floor(y0)));
  const int yb = std::min(img.height - 1, static_cast<int>(std::ceil(y1)) - 1);
  for (int y = ya; y <= yb; ++y)
    for (int x = xa; x <= xb; ++x) img.rgb.row(img.index(x, y)) = color.transpose();
}

void fill_disc(Image& img, double cx, double cy, double r, const Eigen::Array3d& color) {
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) img.rgb.row(img.index(x, y)) = color.transpose();
    }
  }
}

}  // namespace

Image generate_background(std::uint64_t seed, int size) {
  if (size < 1) throw DomainError("background size must be positive");
  Rng rng(seed);
  Image img(size, size);
  const Eigen::Array3d sky_top(rng.uniform(0.2, 0.6), rng.uniform(0.4, 0.8), rng.uniform(0.6, 1.0));
  const Eigen::Array3d sky_low = (sky_top + rng.uniform(0.1, 0.35)).min(1.0);
  const double horizon = rng.uniform(0.3, 0.7) * size;

  static const Eigen::Array3d kGround[] = {
      {0.25, 0.5, 0.2}, {0.35, 0.35, 0.38}, {0.7, 0.62, 0.42}, {0.45, 0.33, 0.22}, {0.55, 0.55, 0.5}};
  const Eigen::Array3d ground =
      (kGround[rng.integer(0, 4)] + Eigen::Array3d(rng.uniform(-0.08, 0.08), rng.uniform(-0.08, 0.08),
                                                   rng.uniform(-0.08, 0.08)))
          .max(0.0)
          .min(1.0);
  const double stripe_amp = rng.uniform(0.0, 0.08);
  const double fx = rng.uniform(0.0, 0.3), fy = rng.uniform(0.05, 0.4);

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Eigen::Array3d c;
      if (y < horizon) {
        const double t = horizon > 1 ? y / horizon : 0.0;
        c = (1 - t) * sky_top + t * sky_low;
      } else {
        c = ground + stripe_amp * std::sin(2 * std::numbers::pi * (x * fx + y * fy));
      }
      img.rgb.row(img.index(x, y)) = c.transpose();
    }
  }

  // Clutter: wide rectangles and small discs only.
  const auto clutter = rng.integer(0, 5);
  for (std::int64_t k = 0; k < clutter; ++k) {
    const Eigen::Array3d color = random_color(rng);
    if (rng.uniform() < 0.6) {
      const double w = rng.uniform(0.15, 0.6) * size;
      const double h = std::min(rng.uniform(0.05, 0.3) * size, 0.8 * w);
      const double x0 = rng.uniform(-0.1, 0.9) * size;
      const double y0 = rng.uniform(0.0, 1.0) * size - h / 2;
      fill_rect(img, x0, y0, x0 + w, y0 + h, color);
    } else {
      fill_disc(img, rng.uniform(0.0, 1.0) * size, rng.uniform(0.0, 1.0) * size,
                rng.uniform(0.04, 0.15) * size, color);
    }
  }
  for (Eigen::Index i = 0; i < img.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) img.rgb(i, c) += rng.uniform(-0.02, 0.02);
  }
  img.rgb = img.rgb.max(0.0).min(1.0);
  return img;
}

BackgroundSet generate_backgrounds(int n, std::uint64_t seed, int image_size, Stream stream) {
  if (n < 1) throw DomainError("generate_backgrounds: n must be >= 1");
  BackgroundSet set;
  set.source = "procedural";
  set.images.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    set.images.push_back(generate_background(derive_seed(seed, stream, static_cast<std::uint64_t>(i)), image_size));
  }
  return set;
}

BackgroundSet load_backgrounds(const std::string& dir, int image_size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("background directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DomainError("no PNG backgrounds in " + dir);
  BackgroundSet set;
  set.source = dir;
  for (const auto& f : files) set.images.push_back(center_crop_resize(read_png(f.string()), image_size));
  return set;
}

std::vector<ProxyParams> standard_proxies() {
  auto make = [](std::string name, double height, double radius, double depth) {
    ProxyParams p;
    p.name = std::move(name);
    p.height = height;
    p.radius = radius;
    p.depth_scale = depth;
    p.segments = 48;
    p.rings = 36;
    return p;
  };
  return {make("proxy_a", 0.75, 0.15, 0.7), make("proxy_b", 0.72, 0.165, 0.8),
          make("proxy_c", 0.68, 0.13, 0.75)};
}

SceneMesh make_scene_mesh(const ProxyParams& params, const Mask& mask, int mask_width,
                          int mask_height, double logo_scale, ProjectionAxes axes) {
  PersonProxy proxy = generate_person_proxy(params);
  const auto panel = front_panel_faces(params, logo_scale);
  const auto faces = select_faces_under_mask(proxy.mesh, panel, mask, mask_width, mask_height, axes);
  LogoSubmesh logo = extract_logo_submesh(proxy.mesh, faces);
  return {std::move(proxy.mesh), std::move(logo)};
}

std::vector<LabeledImage> make_detector_dataset(std::span<const ProxyParams> proxies,
                                                const DetectorDataOptions& opt,
                                                const Camera& base_camera) {
  if (proxies.empty()) throw DomainError("make_detector_dataset: no proxies");
  if (opt.scenes < 1) throw DomainError("make_detector_dataset: scenes must be >= 1");
  std::vector<PersonProxy> meshes;
  std::vector<LogoSubmesh> panels;
  for (const auto& p : proxies) {
    meshes.push_back(generate_person_proxy(p));
    panels.push_back(extract_logo_submesh(meshes.back().mesh, meshes.back().front_panel));
  }

  std::vector<LabeledImage> data;
  data.reserve(static_cast<std::size_t>(opt.scenes));
  for (int i = 0; i < opt.scenes; ++i) {
    Rng rng(opt.seed, Stream::kDetectorData, static_cast<std::uint64_t>(i));
    const bool positive = rng.uniform() < opt.positive_fraction;
    Image background = generate_background(rng.next(), opt.image_size);
    if (!positive) {
      data.push_back({std::move(background), std::nullopt});
      continue;
    }
    const auto which = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(meshes.size()) - 1));
    TriMesh mesh = meshes[which].mesh;
    const double gray = rng.uniform(0.25, 0.75);
    const Eigen::Vector3d body =
        (Eigen::Array3d::Constant(gray) + Eigen::Array3d(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                                                         rng.uniform(-0.1, 0.1)))
            .max(0.0)
            .min(1.0)
            .matrix();
    Eigen::Vector3d panel_color = body;
    if (rng.uniform() < 0.5) panel_color = random_color(rng).matrix();
    mesh.face_textures.assign(mesh.faces.size(), TextureCube::filled(body));
    for (int f : panels[which].face_ids) mesh.face_textures[static_cast<std::size_t>(f)] = TextureCube::filled(panel_color);

    Camera cam = base_camera;
    cam.image_size = opt.image_size;
    cam.azimuth_deg = rng.uniform(-opt.max_azimuth_deg, opt.max_azimuth_deg);
    cam.distance = rng.uniform(opt.min_distance, opt.max_distance);
    cam.pan = Eigen::Vector2d(rng.uniform(-opt.max_pan_x, opt.max_pan_x), rng.uniform(-opt.max_pan_y, opt.max_pan_y));
    const RenderOutput out = render(mesh, panels[which], cam);
    data.push_back({composite(out, background), person_rect(out)});
  }
  return data;
}

double attack_success_rate(const DetectorModel& detector, double threshold,
                           std::span<const Image> frames, int jobs) {
  if (frames.empty()) throw DomainError("attack_success_rate: no frames");
  std::vector<char> missed(frames.size());
  parallel_for(frames.size(), jobs, [&](std::size_t i) {
    missed[i] = detect(detector, frames[i], threshold).empty();
  });
  const auto n = std::count(missed.begin(), missed.end(), 1);
  return static_cast<double>(n) / static_cast<double>(frames.size());
}

double attack_success_rate(std::span<const std::vector<Detection>> detections, double threshold) {
  if (detections.empty()) throw DomainError("attack_success_rate: no frames");
  std::size_t missed = 0;
  for (const auto& list : detections) missed += filter_detections(list, threshold).empty();
  return static_cast<double>(missed) / static_cast<double>(detections.size());
}

std::string EvalResult::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "view_deg,success_rate,n\n";
  for (std::size_t i = 0; i < views.size(); ++i) os << views[i] << ',' << success_rate[i] << ',' << samples[i] << '\n';
  return os.str();
}

double EvalResult::mean_over(int lo_abs_deg, int hi_abs_deg) const {
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const int a = std::abs(views[i]);
    if (a < lo_abs_deg || a > hi_abs_deg) continue;
    sum += success_rate[i];
    ++n;
  }
  if (n == 0) throw DomainError("mean_over: no views in range");
  return sum / n;
}

Image render_test_frame(const SceneMesh& mesh, const TexCoordMap& map, const LogoTexture& texture,
                        const Camera& camera, const Image& background) {
  TriMesh colored = mesh.mesh;
  apply_3d_mapping(texture, map, mesh.logo, colored);
  return composite(render(colored, mesh.logo, camera), background);
}

EvalResult run_protocol(const EvalProtocol& p) {
  if (p.test_views.empty() || p.test_backgrounds.empty() || p.test_meshes.empty()) {
    throw DomainError("run_protocol: views, backgrounds and meshes must be non-empty");
  }
  if (p.detector == nullptr) throw DomainError("run_protocol: no detector");
  p.texture.validate();

  std::vector<TriMesh> colored;
  for (const auto& sm : p.test_meshes) {
    const TexCoordMap map = build_2d_mapping(sm.logo, p.texture, p.axes);
    colored.push_back(sm.mesh);
    apply_3d_mapping(p.texture, map, sm.logo, colored.back());
  }

  EvalResult r;
  for (int view : p.test_views) {
    Camera cam = p.base_camera;
    cam.azimuth_deg = view;
    std::size_t missed = 0, total = 0;
    for (std::size_t m = 0; m < colored.size(); ++m) {
      const RenderOutput out = render(colored[m], p.test_meshes[m].logo, cam);
      std::vector<char> miss(p.test_backgrounds.size());
      parallel_for(miss.size(), p.jobs, [&](std::size_t b) {
        miss[b] = detect(*p.detector, composite(out, p.test_backgrounds[b]), p.threshold).empty();
      });
      missed += static_cast<std::size_t>(std::count(miss.begin(), miss.end(), 1));
      total += miss.size();
    }
    r.views.push_back(view);
    r.samples.push_back(static_cast<int>(total));
    r.success_rate.push_back(static_cast<double>(missed) / static_cast<double>(total));
    r.train_view.push_back(std::find(p.train_views.begin(), p.train_views.end(), view) != p.train_views.end());
  }
  double sum = 0.0;
  for (double v : r.success_rate) sum += v;
  r.mean = sum / static_cast<double>(r.success_rate.size());
  return r;
}

std::vector<GalleryRow> shape_and_size_gallery(const std::vector<std::string>& shapes,
                                               const std::vector<double>& scales,
                                               const GallerySetup& setup) {
  if (shapes.empty() || scales.empty()) throw DomainError("gallery: need shapes and scales");
  if (setup.detector == nullptr) throw DomainError("gallery: no detector");
  std::vector<GalleryRow> rows;
  const int ts = setup.texture_size;
  for (const auto& shape : shapes) {
    const Mask mask = rasterize_shape_mask(shape, ts, ts);
    for (double scale : scales) {
      MeshScene scene;
      for (const auto& p : setup.train_meshes) {
        scene.meshes.push_back(make_scene_mesh(p, mask, ts, ts, scale, setup.attack.axes));
      }
      const LogoTexture start = LogoTexture::uniform(mask, ts, ts);
      const AttackResult attacked =
          run_attack(scene, start, setup.train_backgrounds, *setup.detector, setup.attack);

      EvalProtocol proto;
      for (const auto& v : setup.attack.views) proto.train_views.push_back(static_cast<int>(std::lround(v.azimuth_deg)));
      for (const auto& p : setup.train_meshes) proto.train_meshes.push_back(p.name);
      proto.test_views = setup.test_views;
      for (const auto& p : setup.test_meshes) {
        proto.test_meshes.push_back(make_scene_mesh(p, mask, ts, ts, scale, setup.attack.axes));
      }
      proto.texture = attacked.texture;
      proto.detector = setup.detector;
      proto.threshold = setup.threshold;
      proto.test_backgrounds = setup.test_backgrounds;
      proto.base_camera = setup.attack.views.front();
      proto.axes = setup.attack.axes;
      proto.jobs = setup.jobs;
      rows.push_back({shape, scale, run_protocol(proto)});
    }
  }
  return rows;
}

std::string eval_summary_json(const EvalProtocol& p, const EvalResult& r) {
  nlohmann::ordered_json j;
  j["train_views"] = p.train_views;
  j["test_views"] = p.test_views;
  j["train_meshes"] = p.train_meshes;
  std::vector<std::string> test_names;
  for (const auto& m : p.test_meshes) test_names.push_back(m.mesh.name);
  j["test_meshes"] = test_names;
  j["threshold"] = p.threshold;
  j["n_test_backgrounds"] = p.test_backgrounds.size();
  j["mean_success_rate"] = r.mean;
  auto& per_view = j["per_view"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.views.size(); ++i) {
    per_view.push_back({{"view_deg", r.views[i]},
                        {"success_rate", r.success_rate[i]},
                        {"n", r.samples[i]},
                        {"train_view", static_cast<bool>(r.train_view[i])}});
  }
  return j.dump(2) + "\n";
}

}  // namespace advlogo
