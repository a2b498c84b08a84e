#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace CLI {
class App;
}

namespace advlogo::cli {

// Every pipeline setting. JSON keys and command-line flags share the field
// names (`--lambda_tv` <-> "lambda_tv").
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string assets_dir = "assets";
  int jobs = 1;

  // camera
  int image_size = 64;
  double camera_distance = 2.0;
  double camera_fov_deg = 30.0;
  double camera_elevation_deg = 0.0;

  // logo
  std::string shape = "H";
  int texture_size = 32;
  double logo_scale = 1.0;
  std::string texture_in;  // optional starting texture PNG
  std::vector<std::string> train_meshes = {"proxy_a"};
  std::vector<std::string> test_meshes = {"proxy_c"};

  // attack
  double lambda_dis = 1.0;
  double lambda_tv = 2.5;
  double lr = 0.03;
  double lr_decay = 0.1;
  int lr_decay_every = 50;
  int epochs = 100;
  int background_batch = 8;
  int mesh_batch = 1;
  int train_view_lo = 0;
  int train_view_hi = 0;
  double threshold = 0.6;
  double containment_iou = 0.1;
  int snapshot_every = 0;

  // backgrounds
  int n_backgrounds = 312;
  int n_test_backgrounds = 200;
  std::string background_dir;  // PNG directory; procedural when empty

  // detector
  std::string detector_weights;  // default <out_dir>/detector.bin
  int detector_scenes = 6000;
  int detector_epochs = 16;
  double detector_lr = 4e-3;
  int detector_batch = 16;
  double detector_label_smoothing = 0.1;
  double detector_min_recall = 0.9;

  // evaluation
  int eval_view_lo = -10;
  int eval_view_hi = 10;
  bool sweep = false;
  bool smoke = false;
  bool gallery = false;
  std::vector<std::string> gallery_shapes = {"G", "O", "C", "X", "T", "H"};
  std::vector<double> gallery_scales = {1.0, 2.0 / 3.0, 1.0 / 3.0};
  int gallery_epochs = 20;
  std::string texture_path;  // texture evaluated by `eval`; default <out_dir>/texture.png

  std::string weights_path() const;
  std::string eval_texture_path() const;
  void validate() const;
};

// Field names in declaration order.
std::vector<std::string> config_keys();

// Unknown keys and type mismatches raise ConfigError.
void apply_json(RunConfig& cfg, const nlohmann::json& j);
RunConfig load_config(const std::string& path);
nlohmann::ordered_json to_json(const RunConfig& cfg);

// Registers one flag per field on `app`, writing into `cfg`.
void add_flags(CLI::App& app, RunConfig& cfg);

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitParse = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitGate = 5;

int cmd_gen_assets(const RunConfig& cfg, std::ostream& log);
int cmd_train_detector(const RunConfig& cfg, std::ostream& log);
int cmd_attack(const RunConfig& cfg, std::ostream& log);
int cmd_eval(const RunConfig& cfg, std::ostream& log);

// Parses argv, dispatches, and maps exceptions to exit codes.
int run(int argc, char** argv);

}  // namespace advlogo::cli
