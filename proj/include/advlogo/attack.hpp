#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advlogo/adam.hpp"
#include "advlogo/box.hpp"
#include "advlogo/detector.hpp"
#include "advlogo/logo_transform.hpp"
#include "advlogo/mesh.hpp"
#include "advlogo/renderer.hpp"

namespace advlogo {

struct AttackConfig {
  double lambda_dis = 1.0;
  double lambda_tv = 2.5;
  double lr0 = 0.03;
  double lr_decay = 0.1;
  int lr_decay_every = 50;
  int epochs = 100;
  int background_batch = 8;
  int mesh_batch = 1;
  AdamParams adam;
  std::uint64_t seed = 0;
  std::vector<Camera> views = {Camera{}};
  double threshold = 0.6;
  // A detector box "contains" the person when its IoU with the rendered
  // person rectangle exceeds this.
  double containment_iou = 0.1;
  ProjectionAxes axes{0, 1, true};
  int jobs = 1;

  void validate() const;
};

struct AdamState {
  Eigen::ArrayX3d first;
  Eigen::ArrayX3d second;
  std::int64_t step = 0;

  static AdamState zeros(int width, int height);
};

struct EpochRecord {
  int epoch = 0;
  double mean_dis = 0.0;
  double mean_tv = 0.0;
  double total = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  // Epochs at which a texture snapshot was emitted.
  std::vector<int> snapshot_epochs;

  // "epoch,mean_dis,mean_tv,total,lr"
  std::string to_csv() const;
};

struct DisResult {
  double value = 0.0;
  int index = -1;  // detection routed to, -1 when there were none
  bool fallback = false;  // no box contained the person; global max used
};

// Max confidence over boxes containing the person, falling back to the
// global max when none qualify.
DisResult disappearance_loss(const std::vector<Detection>& detections,
                             const std::optional<Box>& person, double containment_iou = 0.1);
// One-hot subgradient over the detections.
std::vector<double> disappearance_grad(const DisResult& dis, std::size_t count, double scale = 1.0);

// Anisotropic total variation over rendered logo pixels; a neighbour
// difference counts only when both pixels are logo pixels.
double tv_loss(const RenderOutput& render);
Image tv_loss_backward(const RenderOutput& render);

double total_loss(double dis, double tv, const AttackConfig& cfg);

double lr_schedule(int epoch, const AttackConfig& cfg);

// Masked Adam update followed by clamping to [0,1].
void adam_step(const Image& grad, AdamState& state, LogoTexture& texture, double lr,
               const AdamParams& params = {});

// A scene mesh with its frozen texture map and per-view rasterisations.
struct PreparedMesh {
  TriMesh mesh;
  LogoSubmesh logo;
  TexCoordMap map;
  std::vector<std::optional<Rasterization>> rasters;

  PreparedMesh(const SceneMesh& source, const LogoTexture& texture, ProjectionAxes axes,
               std::size_t view_count);
  const Rasterization& raster(std::size_t view, const Camera& camera);
};

struct StepEvaluation {
  double mean_dis = 0.0;
  double mean_tv = 0.0;
  double loss = 0.0;
  Image texture_grad;
};

// Loss and exact texture gradient for one optimisation step. DIS follows
// augment -> recolour -> shade -> composite -> detect, averaged over every
// (mesh, background) pair; TV is taken on the render of the un-augmented
// texture, averaged over meshes.
StepEvaluation evaluate_step(std::span<PreparedMesh*> meshes, std::size_t view, const Camera& camera,
                             const LogoTexture& texture, const AugmentParams& augment,
                             std::span<const Image* const> backgrounds, const DetectorModel& detector,
                             const AttackConfig& cfg);

struct AttackResult {
  LogoTexture texture;
  TrainReport report;
};

using SnapshotFn = std::function<void(int epoch, const LogoTexture& texture)>;

AttackResult run_attack(const MeshScene& scene, const LogoTexture& texture,
                        std::span<const Image> backgrounds, const DetectorModel& detector,
                        const AttackConfig& cfg, int snapshot_every = 0,
                        const SnapshotFn& snapshot = {});

}  // namespace advlogo
