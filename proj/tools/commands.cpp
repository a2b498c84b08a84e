#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "advlogo/attack.hpp"
#include "advlogo/detector.hpp"
#include "advlogo/errors.hpp"
#include "advlogo/harness.hpp"
#include "cli.hpp"

namespace advlogo::cli {

namespace fs = std::filesystem;

namespace {

Camera base_camera(const RunConfig& cfg) {
  Camera c;
  c.distance = cfg.camera_distance;
  c.fov_deg = cfg.camera_fov_deg;
  c.elevation_deg = cfg.camera_elevation_deg;
  c.image_size = cfg.image_size;
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ProxyParams proxy_named(const std::string& name) {
  for (const auto& p : standard_proxies()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown mesh: " + name);
}

std::vector<ProxyParams> proxies_named(const std::vector<std::string>& names) {
  std::vector<ProxyParams> out;
  for (const auto& n : names) out.push_back(proxy_named(n));
  return out;
}

Mask logo_mask(const RunConfig& cfg) {
  const int n = cfg.texture_size;
  if (cfg.shape.size() > 4 && cfg.shape.ends_with(".png")) {
    int w = 0, h = 0;
    const Mask m = read_mask_png(cfg.shape, &w, &h);
    Bitmap bmp(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) bmp(y, x) = m[Eigen::Index{y} * w + x] ? 1.0 : 0.0;
    return rasterize_shape_mask(bmp, n, n);
  }
  const auto glyphs = builtin_glyphs();
  if (std::find(glyphs.begin(), glyphs.end(), cfg.shape) == glyphs.end()) {
    throw ConfigError("unknown shape: " + cfg.shape);
  }
  return rasterize_shape_mask(cfg.shape, n, n);
}

LogoTexture read_texture(const std::string& path, const Mask& mask, int size) {
  Image img = read_png(path);
  if (img.width != size || img.height != size) {
    throw ConfigError("texture " + path + " is not " + std::to_string(size) + "x" + std::to_string(size));
  }
  return LogoTexture{std::move(img), mask};
}

std::vector<Image> train_backgrounds(const RunConfig& cfg) {
  if (!cfg.background_dir.empty()) return load_backgrounds(cfg.background_dir, cfg.image_size).images;
  return generate_backgrounds(cfg.n_backgrounds, cfg.seed, cfg.image_size).images;
}

std::vector<Image> test_backgrounds(const RunConfig& cfg) {
  return generate_backgrounds(cfg.n_test_backgrounds, cfg.seed, cfg.image_size, Stream::kTestBackgrounds).images;
}

AttackConfig attack_config(const RunConfig& cfg, int epochs) {
  AttackConfig a;
  a.lambda_dis = cfg.lambda_dis;
  a.lambda_tv = cfg.lambda_tv;
  a.lr0 = cfg.lr;
  a.lr_decay = cfg.lr_decay;
  a.lr_decay_every = cfg.lr_decay_every;
  a.epochs = epochs;
  a.background_batch = cfg.background_batch;
  a.mesh_batch = cfg.mesh_batch;
  a.seed = cfg.seed;
  a.views = sample_views(cfg.train_view_lo, cfg.train_view_hi, 1, base_camera(cfg));
  a.threshold = cfg.threshold;
  a.containment_iou = cfg.containment_iou;
  a.jobs = cfg.jobs;
  a.validate();
  return a;
}

std::vector<int> view_range(int lo, int hi) {
  std::vector<int> v;
  for (int a = lo; a <= hi; ++a) v.push_back(a);
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

std::string padded(int i, int width = 4) {
  std::string s = std::to_string(i);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

int cmd_gen_assets(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path root(cfg.assets_dir);
  fs::create_directories(root / "meshes");
  fs::create_directories(root / "masks");
  fs::create_directories(root / "backgrounds");

  int meshes = 0;
  for (const auto& p : standard_proxies()) {
    const PersonProxy proxy = generate_person_proxy(p);
    const fs::path obj = root / "meshes" / (p.name + ".obj");
    save_obj(obj.string(), proxy.mesh);
    if (load_obj(obj.string()).faces != proxy.mesh.faces) throw ParseError("OBJ re-parse mismatch: " + obj.string());
    std::string panel;
    for (int f : proxy.front_panel) panel += std::to_string(f) + "\n";
    write_text(root / "meshes" / (p.name + ".panel.txt"), panel);
    ++meshes;
  }
  int masks = 0;
  for (const auto& g : builtin_glyphs()) {
    write_mask_png((root / "masks" / (g + ".png")).string(), rasterize_shape_mask(g, cfg.texture_size, cfg.texture_size),
                   cfg.texture_size, cfg.texture_size);
    ++masks;
  }
  const auto train = generate_backgrounds(cfg.n_backgrounds, cfg.seed, cfg.image_size).images;
  for (std::size_t i = 0; i < train.size(); ++i)
    write_png((root / "backgrounds" / ("train_" + padded(static_cast<int>(i)) + ".png")).string(), train[i]);
  const auto test = test_backgrounds(cfg);
  for (std::size_t i = 0; i < test.size(); ++i)
    write_png((root / "backgrounds" / ("test_" + padded(static_cast<int>(i)) + ".png")).string(), test[i]);
  log << "meshes " << meshes << ", masks " << masks << ", backgrounds " << train.size() << " train + "
      << test.size() << " test -> " << root.string() << "\n";
  return kExitOk;
}

int cmd_train_detector(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const auto proxies = standard_proxies();
  DetectorDataOptions data_opts;
  data_opts.scenes = cfg.detector_scenes;
  data_opts.seed = cfg.seed;
  data_opts.image_size = cfg.image_size;
  const auto data = make_detector_dataset(proxies, data_opts, base_camera(cfg));

  DetectorModel model = DetectorModel::random(cfg.seed);
  DetectorTrainOptions opt;
  opt.epochs = cfg.detector_epochs;
  opt.lr = cfg.detector_lr;
  opt.batch_size = cfg.detector_batch;
  opt.label_smoothing = cfg.detector_label_smoothing;
  opt.seed = cfg.seed;
  opt.threshold = cfg.threshold;
  opt.jobs = cfg.jobs;
  const DetectorMetrics m = train_detector(model, data, opt);
  save_weights(cfg.weights_path(), model);

  std::ostringstream csv;
  csv.precision(10);
  csv << "epoch,loss\n";
  for (std::size_t e = 0; e < m.epoch_loss.size(); ++e) csv << e << ',' << m.epoch_loss[e] << '\n';
  write_text(fs::path(cfg.out_dir) / "detector_metrics.csv", csv.str());
  nlohmann::ordered_json summary{{"recall", m.recall},
                                 {"false_positive_rate", m.false_positive_rate},
                                 {"held_out_positives", m.held_out_positives},
                                 {"held_out_negatives", m.held_out_negatives},
                                 {"threshold", cfg.threshold}};
  write_text(fs::path(cfg.out_dir) / "detector_metrics.json", summary.dump(2) + "\n");
  log << "held-out recall " << m.recall << ", false-positive rate " << m.false_positive_rate << " -> "
      << cfg.weights_path() << "\n";
  if (m.recall < cfg.detector_min_recall) {
    log << "recall below " << cfg.detector_min_recall << "\n";
    return kExitGate;
  }
  return kExitOk;
}

int cmd_attack(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const AttackConfig acfg = attack_config(cfg, cfg.epochs);
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const DetectorModel detector = load_weights(cfg.weights_path());
  const Mask mask = logo_mask(cfg);
  const int n = cfg.texture_size;

  MeshScene scene;
  for (const auto& p : proxies_named(cfg.train_meshes)) {
    scene.meshes.push_back(make_scene_mesh(p, mask, n, n, cfg.logo_scale, acfg.axes));
  }
  const LogoTexture start = cfg.texture_in.empty() ? LogoTexture::uniform(mask, n, n) : read_texture(cfg.texture_in, mask, n);
  const auto backgrounds = train_backgrounds(cfg);

  if (cfg.snapshot_every > 0) fs::create_directories(out / "snapshots");
  const AttackResult result = run_attack(
      scene, start, backgrounds, detector, acfg, cfg.snapshot_every, [&](int epoch, const LogoTexture& t) {
        write_png((out / "snapshots" / ("epoch_" + padded(epoch + 1) + ".png")).string(), t.image);
      });

  write_png((out / "texture.png").string(), result.texture.image);
  write_mask_png((out / "texture_mask.png").string(), mask, n, n);
  write_text(out / "train_report.csv", result.report.to_csv());
  for (const auto& sm : scene.meshes) {
    write_text(out / (sm.mesh.name + ".texmap.csv"), build_2d_mapping(sm.logo, start, acfg.axes).to_csv());
  }
  if (!result.report.epochs.empty()) {
    const auto& first = result.report.epochs.front();
    const auto& last = result.report.epochs.back();
    log << "epochs " << result.report.epochs.size() << ": mean DIS " << first.mean_dis << " -> " << last.mean_dis
        << ", mean TV " << first.mean_tv << " -> " << last.mean_tv << "\n";
  } else {
    log << "epochs 0: texture unchanged\n";
  }
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  const DetectorModel detector = load_weights(cfg.weights_path());
  const Mask mask = logo_mask(cfg);
  const int n = cfg.texture_size;
  const ProjectionAxes axes = AttackConfig{}.axes;
  const Camera camera = base_camera(cfg);
  const auto tests = test_backgrounds(cfg);

  if (cfg.gallery) {
    GallerySetup g;
    g.train_meshes = proxies_named(cfg.train_meshes);
    g.test_meshes = proxies_named(cfg.test_meshes);
    g.texture_size = n;
    g.attack = attack_config(cfg, cfg.gallery_epochs);
    g.train_backgrounds = train_backgrounds(cfg);
    g.test_backgrounds = tests;
    g.test_views = cfg.sweep ? view_range(-50, 50) : view_range(cfg.eval_view_lo, cfg.eval_view_hi);
    g.detector = &detector;
    g.threshold = cfg.threshold;
    g.jobs = cfg.jobs;
    std::vector<std::string> shapes = cfg.gallery_shapes;
    const auto rows = shape_and_size_gallery(shapes, cfg.gallery_scales, g);
    std::ostringstream csv;
    csv.precision(10);
    csv << "shape,scale,mean_success_rate\n";
    for (const auto& r : rows) csv << r.shape << ',' << r.scale << ',' << r.result.mean << '\n';
    write_text(out / "gallery.csv", csv.str());
    log << "gallery rows " << rows.size() << " -> " << (out / "gallery.csv").string() << "\n";
    return kExitOk;
  }

  const LogoTexture texture = read_texture(cfg.eval_texture_path(), mask, n);
  std::vector<SceneMesh> meshes;
  for (const auto& p : proxies_named(cfg.test_meshes)) meshes.push_back(make_scene_mesh(p, mask, n, n, cfg.logo_scale, axes));

  if (cfg.smoke) {
    const TexCoordMap map = build_2d_mapping(meshes.front().logo, texture, axes);
    const Image frame = render_test_frame(meshes.front(), map, texture, camera, tests.front());
    write_png((out / "eval_frame.png").string(), frame);
    const auto found = detect(detector, frame, cfg.threshold);
    log << "smoke frame: " << found.size() << " detections above " << cfg.threshold << "\n";
    return kExitOk;
  }

  EvalProtocol p;
  p.train_views = view_range(cfg.train_view_lo, cfg.train_view_hi);
  p.test_views = cfg.sweep ? view_range(-50, 50) : view_range(cfg.eval_view_lo, cfg.eval_view_hi);
  p.train_meshes = cfg.train_meshes;
  p.test_meshes = std::move(meshes);
  p.texture = texture;
  p.detector = &detector;
  p.threshold = cfg.threshold;
  p.test_backgrounds = tests;
  p.base_camera = camera;
  p.axes = axes;
  p.jobs = cfg.jobs;
  const EvalResult r = run_protocol(p);
  write_text(out / "eval.csv", r.to_csv());
  write_text(out / "eval.json", eval_summary_json(p, r));
  log << "views " << r.views.size() << ", mean success rate " << r.mean << "\n";
  return kExitOk;
}

int run(int argc, char** argv) {
  RunConfig cfg;
  // The config file seeds the defaults; explicit flags then override it.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        cfg = load_config(argv[i + 1]);
      } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
      }
    }
  }

  CLI::App app{"3D adversarial logo pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; keys match the flag names");
  add_flags(app, cfg);
  bool print_config = false;
  app.add_flag("--print_config", print_config, "print the effective config as JSON and exit");
  auto* gen = app.add_subcommand("gen-assets", "write proxy meshes, shape masks and backgrounds");
  auto* train = app.add_subcommand("train-detector", "train the toy detector on synthetic scenes");
  auto* attack = app.add_subcommand("attack", "optimise the logo texture");
  auto* eval = app.add_subcommand("eval", "evaluate a texture over test views and meshes");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (print_config) {
    std::cout << to_json(cfg).dump(2) << "\n";
    return kExitOk;
  }

  try {
    if (gen->parsed()) return cmd_gen_assets(cfg, std::cout);
    if (train->parsed()) return cmd_train_detector(cfg, std::cout);
    if (attack->parsed()) return cmd_attack(cfg, std::cout);
    if (eval->parsed()) return cmd_eval(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitParse;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace advlogo::cli
