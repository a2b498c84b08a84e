#include "advlogo/attack.hpp"

#include <cmath>
#include <sstream>

#include "advlogo/errors.hpp"
#include "advlogo/parallel.hpp"
#include "advlogo/random.hpp"

namespace advlogo {

void AttackConfig::validate() const {
  if (lambda_dis < 0 || lambda_tv < 0) throw ConfigError("loss weights must be >= 0");
  if (!(lr0 > 0)) throw ConfigError("learning rate must be positive");
  if (!(lr_decay > 0) || lr_decay_every < 1) throw ConfigError("bad learning-rate decay");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (background_batch < 1 || mesh_batch < 1) throw ConfigError("batch sizes must be >= 1");
  if (views.empty()) throw ConfigError("at least one view required");
  if (!(threshold > 0 && threshold < 1)) throw ConfigError("threshold must lie in (0,1)");
  for (const auto& v : views) v.validate();
}

AdamState AdamState::zeros(int width, int height) {
  const Eigen::Index n = Eigen::Index{width} * height;
  return {Eigen::ArrayX3d::Zero(n, 3), Eigen::ArrayX3d::Zero(n, 3), 0};
}

std::string TrainReport::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,mean_dis,mean_tv,total,lr\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.mean_dis << ',' << e.mean_tv << ',' << e.total << ',' << e.lr << '\n';
  }
  return os.str();
}

DisResult disappearance_loss(const std::vector<Detection>& detections,
                             const std::optional<Box>& person, double containment_iou) {
  DisResult r;
  if (detections.empty()) return r;
  if (person) {
    for (std::size_t i = 0; i < detections.size(); ++i) {
      if (iou(detections[i].box, *person) <= containment_iou) continue;
      if (r.index < 0 || detections[i].confidence > r.value) {
        r.value = detections[i].confidence;
        r.index = static_cast<int>(i);
      }
    }
  }
  if (r.index >= 0) return r;
  r.fallback = true;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (r.index < 0 || detections[i].confidence > r.value) {
      r.value = detections[i].confidence;
      r.index = static_cast<int>(i);
    }
  }
  return r;
}

std::vector<double> disappearance_grad(const DisResult& dis, std::size_t count, double scale) {
  std::vector<double> g(count, 0.0);
  if (dis.index >= 0) g.at(static_cast<std::size_t>(dis.index)) = scale;
  return g;
}

namespace {

template <typename PairFn>
void for_each_logo_pair(const RenderOutput& r, PairFn&& fn) {
  const int size = r.size();
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Eigen::Index i = Eigen::Index{y} * size + x;
      if (!r.logo_mask[i]) continue;
      if (x + 1 < size && r.logo_mask[i + 1]) fn(i, i + 1);
      if (y + 1 < size && r.logo_mask[i + size]) fn(i, i + size);
    }
  }
}

}  // namespace

double tv_loss(const RenderOutput& render) {
  double tv = 0.0;
  for_each_logo_pair(render, [&](Eigen::Index a, Eigen::Index b) {
    tv += (render.rgb.rgb.row(a) - render.rgb.rgb.row(b)).abs().sum();
  });
  return tv;
}

Image tv_loss_backward(const RenderOutput& render) {
  Image g(render.rgb.width, render.rgb.height);
  for_each_logo_pair(render, [&](Eigen::Index a, Eigen::Index b) {
    const Eigen::Array<double, 1, 3> s = (render.rgb.rgb.row(a) - render.rgb.rgb.row(b)).sign();
    g.rgb.row(a) += s;
    g.rgb.row(b) -= s;
  });
  return g;
}

double total_loss(double dis, double tv, const AttackConfig& cfg) {
  return cfg.lambda_dis * dis + cfg.lambda_tv * tv;
}

double lr_schedule(int epoch, const AttackConfig& cfg) {
  if (epoch < 0) throw DomainError("lr_schedule: negative epoch");
  return cfg.lr0 * std::pow(cfg.lr_decay, epoch / cfg.lr_decay_every);
}

void adam_step(const Image& grad, AdamState& state, LogoTexture& texture, double lr,
               const AdamParams& params) {
  if (!grad.same_size(texture.image) || state.first.rows() != texture.image.pixels()) {
    throw DimensionError("adam_step: gradient/state/texture size mismatch");
  }
  if (!grad.rgb.isFinite().all()) throw NumericError("adam_step: non-finite gradient");
  ++state.step;
  Eigen::ArrayX3d pixels = texture.image.rgb;
  adam_update(grad.rgb, state.first, state.second, pixels, state.step, lr, params);
  for (Eigen::Index i = 0; i < pixels.rows(); ++i) {
    if (texture.mask[i]) texture.image.rgb.row(i) = pixels.row(i).max(0.0).min(1.0);
  }
}

PreparedMesh::PreparedMesh(const SceneMesh& source, const LogoTexture& texture, ProjectionAxes axes,
                           std::size_t view_count)
    : mesh(source.mesh),
      logo(source.logo),
      map(build_2d_mapping(source.logo, texture, axes)),
      rasters(view_count) {
  mesh.validate();
}

const Rasterization& PreparedMesh::raster(std::size_t view, const Camera& camera) {
  auto& slot = rasters.at(view);
  if (!slot) slot = rasterize(mesh, camera);
  return *slot;
}

StepEvaluation evaluate_step(std::span<PreparedMesh*> meshes, std::size_t view, const Camera& camera,
                             const LogoTexture& texture, const AugmentParams& augment,
                             std::span<const Image* const> backgrounds, const DetectorModel& detector,
                             const AttackConfig& cfg) {
  if (meshes.empty() || backgrounds.empty()) throw DomainError("evaluate_step: empty batch");
  const LogoTexture augmented = augment_logo_texture(texture, augment);
  const double n_mesh = static_cast<double>(meshes.size());
  const double n_pairs = n_mesh * static_cast<double>(backgrounds.size());

  StepEvaluation ev;
  Image aug_grad(texture.width(), texture.height());
  Image clean_grad(texture.width(), texture.height());
  for (PreparedMesh* pm : meshes) {
    const Rasterization& raster = pm->raster(view, camera);

    // TV is taken on the render of the un-augmented logo.
    apply_3d_mapping(texture, pm->map, pm->logo, pm->mesh);
    const RenderOutput clean = shade(raster, pm->mesh, pm->logo);
    ev.mean_tv += tv_loss(clean) / n_mesh;
    Image tv_grad = tv_loss_backward(clean);
    tv_grad.rgb *= cfg.lambda_tv / n_mesh;
    clean_grad.rgb += backward_3d_mapping(pm->map, pm->logo, render_backward(tv_grad, clean, pm->logo)).rgb;

    apply_3d_mapping(augmented, pm->map, pm->logo, pm->mesh);
    const RenderOutput out = shade(raster, pm->mesh, pm->logo);
    const auto rect = person_rect(out);
    Image pixel_grad(out.rgb.width, out.rgb.height);

    std::vector<Image> frame_grads(backgrounds.size());
    std::vector<double> dis(backgrounds.size());
    parallel_for(backgrounds.size(), cfg.jobs, [&](std::size_t b) {
      const Image frame = composite(out, *backgrounds[b]);
      ForwardPass pass = forward(detector, frame);
      const DisResult d = disappearance_loss(pass.detections, rect, cfg.containment_iou);
      dis[b] = d.value;
      const auto g = disappearance_grad(d, pass.detections.size(), cfg.lambda_dis / n_pairs);
      frame_grads[b] = composite_backward(out, backward_to_image(detector, pass, g));
    });
    for (std::size_t b = 0; b < backgrounds.size(); ++b) {
      ev.mean_dis += dis[b] / n_pairs;
      pixel_grad.rgb += frame_grads[b].rgb;
    }
    const CubeGradients cube_grads = render_backward(pixel_grad, out, pm->logo);
    aug_grad.rgb += backward_3d_mapping(pm->map, pm->logo, cube_grads).rgb;
  }
  ev.texture_grad = augment_backward(texture, augment, aug_grad);
  ev.texture_grad.rgb += clean_grad.rgb;
  ev.loss = total_loss(ev.mean_dis, ev.mean_tv, cfg);
  return ev;
}

AttackResult run_attack(const MeshScene& scene, const LogoTexture& texture,
                        std::span<const Image> backgrounds, const DetectorModel& detector,
                        const AttackConfig& cfg, int snapshot_every, const SnapshotFn& snapshot) {
  cfg.validate();
  texture.validate();
  if (scene.meshes.empty()) throw DomainError("run_attack: scene has no meshes");
  if (backgrounds.empty()) throw DomainError("run_attack: no backgrounds");

  std::vector<PreparedMesh> prepared;
  prepared.reserve(scene.meshes.size());
  for (const auto& sm : scene.meshes) prepared.emplace_back(sm, texture, cfg.axes, cfg.views.size());

  AttackResult result{texture, {}};
  AdamState state = AdamState::zeros(texture.width(), texture.height());
  const auto mesh_batch = static_cast<std::size_t>(cfg.mesh_batch);
  const auto bg_batch = static_cast<std::size_t>(cfg.background_batch);
  std::uint64_t step_counter = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    double dis_sum = 0.0, tv_sum = 0.0;
    int steps = 0;
    // Meshes outer, views middle, background batches inner.
    for (std::size_t m0 = 0; m0 < prepared.size(); m0 += mesh_batch) {
      std::vector<PreparedMesh*> group;
      for (std::size_t m = m0; m < std::min(prepared.size(), m0 + mesh_batch); ++m) group.push_back(&prepared[m]);
      for (std::size_t v = 0; v < cfg.views.size(); ++v) {
        for (std::size_t b0 = 0; b0 < backgrounds.size(); b0 += bg_batch) {
          std::vector<const Image*> batch;
          for (std::size_t b = b0; b < std::min(backgrounds.size(), b0 + bg_batch); ++b) batch.push_back(&backgrounds[b]);
          const AugmentParams aug = AugmentParams::draw(
              derive_seed(cfg.seed, Stream::kAugment, step_counter++), texture.width(), texture.height());
          const StepEvaluation ev =
              evaluate_step(group, v, cfg.views[v], result.texture, aug, batch, detector, cfg);
          adam_step(ev.texture_grad, state, result.texture, lr, cfg.adam);
          dis_sum += ev.mean_dis;
          tv_sum += ev.mean_tv;
          ++steps;
        }
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_dis = dis_sum / steps;
    rec.mean_tv = tv_sum / steps;
    rec.total = total_loss(rec.mean_dis, rec.mean_tv, cfg);
    rec.lr = lr;
    result.report.epochs.push_back(rec);
    if (snapshot_every > 0 && (epoch + 1) % snapshot_every == 0) {
      result.report.snapshot_epochs.push_back(epoch);
      if (snapshot) snapshot(epoch, result.texture);
    }
  }
  return result;
}

}  // namespace advlogo
