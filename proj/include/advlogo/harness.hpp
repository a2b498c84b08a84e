#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "advlogo/attack.hpp"
#include "advlogo/detector.hpp"
#include "advlogo/image.hpp"
#include "advlogo/logo_transform.hpp"
#include "advlogo/mesh.hpp"
#include "advlogo/random.hpp"
#include "advlogo/renderer.hpp"

namespace advlogo {

struct BackgroundSet {
  std::vector<Image> images;
  std::string source;  // "procedural" or the directory read from
};

// Sky gradient, textured ground and wide-rectangle/disc clutter; never
// contains anything person-shaped.
Image generate_background(std::uint64_t seed, int image_size);
BackgroundSet generate_backgrounds(int n, std::uint64_t seed, int image_size,
                                   Stream stream = Stream::kBackgrounds);
// Every *.png in the directory (sorted by name), centre-cropped and resized.
BackgroundSet load_backgrounds(const std::string& dir, int image_size);

// Three proxies of distinct build used as the train/test meshes.
std::vector<ProxyParams> standard_proxies();

// Proxy mesh with its logo carved out of the front panel by the mask.
SceneMesh make_scene_mesh(const ProxyParams& params, const Mask& mask, int mask_width,
                          int mask_height, double logo_scale = 1.0, ProjectionAxes axes = {0, 1, true});

struct DetectorDataOptions {
  int scenes = 6000;
  double positive_fraction = 0.5;
  std::uint64_t seed = 0;
  int image_size = 64;
  double max_azimuth_deg = 90.0;
  double max_pan_x = 0.25;
  double max_pan_y = 0.08;
  double min_distance = 1.8;
  double max_distance = 2.4;
};

// Positives: a random proxy at a random pose with random body colour and a
// random constant panel colour, over a procedural background.
std::vector<LabeledImage> make_detector_dataset(std::span<const ProxyParams> proxies,
                                                const DetectorDataOptions& options,
                                                const Camera& base_camera = {});

// Fraction of frames with no detection above the threshold.
double attack_success_rate(const DetectorModel& detector, double threshold,
                           std::span<const Image> frames, int jobs = 1);
// Same ratio from saved detection lists.
double attack_success_rate(std::span<const std::vector<Detection>> detections, double threshold);

struct EvalProtocol {
  std::vector<int> train_views;
  std::vector<int> test_views;
  std::vector<std::string> train_meshes;  // echoed in summaries only
  std::vector<SceneMesh> test_meshes;
  LogoTexture texture;
  const DetectorModel* detector = nullptr;
  double threshold = 0.6;
  std::vector<Image> test_backgrounds;
  Camera base_camera;
  ProjectionAxes axes{0, 1, true};
  int jobs = 1;
};

struct EvalResult {
  std::vector<int> views;
  std::vector<double> success_rate;
  std::vector<int> samples;
  std::vector<bool> train_view;
  double mean = 0.0;

  // "view_deg,success_rate,n"
  std::string to_csv() const;
  // Mean over views whose |angle| lies in [lo, hi].
  double mean_over(int lo_abs_deg, int hi_abs_deg) const;
};

EvalResult run_protocol(const EvalProtocol& protocol);

// Composited test frame for one mesh/view/background with the texture applied.
Image render_test_frame(const SceneMesh& mesh, const TexCoordMap& map, const LogoTexture& texture,
                        const Camera& camera, const Image& background);

struct GallerySetup {
  std::vector<ProxyParams> train_meshes;
  std::vector<ProxyParams> test_meshes;
  int texture_size = 32;
  AttackConfig attack;
  std::vector<Image> train_backgrounds;
  std::vector<Image> test_backgrounds;
  std::vector<int> test_views;
  const DetectorModel* detector = nullptr;
  double threshold = 0.6;
  int jobs = 1;
};

struct GalleryRow {
  std::string shape;
  double scale = 1.0;
  EvalResult result;
};

// One attack + evaluation per (shape, scale).
std::vector<GalleryRow> shape_and_size_gallery(const std::vector<std::string>& shapes,
                                               const std::vector<double>& scales,
                                               const GallerySetup& setup);

// JSON summary of a protocol run.
std::string eval_summary_json(const EvalProtocol& protocol, const EvalResult& result);

}  // namespace advlogo
