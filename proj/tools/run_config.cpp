#include <fstream>
#include <variant>

#include <CLI11.hpp>

#include "advlogo/errors.hpp"
#include "cli.hpp"

namespace advlogo::cli {

namespace {

using MemberPtr =
    std::variant<std::uint64_t RunConfig::*, int RunConfig::*, double RunConfig::*, bool RunConfig::*,
                 std::string RunConfig::*, std::vector<std::string> RunConfig::*,
                 std::vector<double> RunConfig::*>;

struct Field {
  const char* name;
  MemberPtr member;
  const char* help;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      {"seed", &RunConfig::seed, "root seed for every random stream"},
      {"out_dir", &RunConfig::out_dir, "output directory"},
      {"assets_dir", &RunConfig::assets_dir, "gen-assets output directory"},
      {"jobs", &RunConfig::jobs, "worker threads for render/detect stages"},
      {"image_size", &RunConfig::image_size, "rendered frame side in pixels (multiple of 16)"},
      {"camera_distance", &RunConfig::camera_distance, "camera distance from the mesh origin"},
      {"camera_fov_deg", &RunConfig::camera_fov_deg, "vertical field of view in degrees"},
      {"camera_elevation_deg", &RunConfig::camera_elevation_deg, "camera elevation in degrees"},
      {"shape", &RunConfig::shape, "logo glyph name or mask PNG path"},
      {"texture_size", &RunConfig::texture_size, "logo texture side in pixels"},
      {"logo_scale", &RunConfig::logo_scale, "logo footprint on the front panel, in (0,1]"},
      {"texture_in", &RunConfig::texture_in, "starting texture PNG (default uniform gray)"},
      {"train_meshes", &RunConfig::train_meshes, "proxy meshes used for the attack"},
      {"test_meshes", &RunConfig::test_meshes, "proxy meshes used for evaluation"},
      {"lambda_dis", &RunConfig::lambda_dis, "disappearance loss weight"},
      {"lambda_tv", &RunConfig::lambda_tv, "total variation loss weight"},
      {"lr", &RunConfig::lr, "initial attack learning rate"},
      {"lr_decay", &RunConfig::lr_decay, "learning-rate decay factor"},
      {"lr_decay_every", &RunConfig::lr_decay_every, "epochs between learning-rate decays"},
      {"epochs", &RunConfig::epochs, "attack epochs"},
      {"background_batch", &RunConfig::background_batch, "backgrounds per attack step"},
      {"mesh_batch", &RunConfig::mesh_batch, "meshes per attack step"},
      {"train_view_lo", &RunConfig::train_view_lo, "lowest training view angle (degrees)"},
      {"train_view_hi", &RunConfig::train_view_hi, "highest training view angle (degrees)"},
      {"threshold", &RunConfig::threshold, "detection confidence threshold"},
      {"containment_iou", &RunConfig::containment_iou, "IoU above which a box contains the person"},
      {"snapshot_every", &RunConfig::snapshot_every, "write a texture PNG every N epochs (0 = off)"},
      {"n_backgrounds", &RunConfig::n_backgrounds, "procedural training backgrounds"},
      {"n_test_backgrounds", &RunConfig::n_test_backgrounds, "procedural test backgrounds"},
      {"background_dir", &RunConfig::background_dir, "directory of training background PNGs"},
      {"detector_weights", &RunConfig::detector_weights, "detector weights file (default <out_dir>/detector.bin)"},
      {"detector_scenes", &RunConfig::detector_scenes, "synthetic scenes for detector training"},
      {"detector_epochs", &RunConfig::detector_epochs, "detector training epochs"},
      {"detector_lr", &RunConfig::detector_lr, "detector learning rate"},
      {"detector_batch", &RunConfig::detector_batch, "detector minibatch size"},
      {"detector_label_smoothing", &RunConfig::detector_label_smoothing, "detector confidence target smoothing"},
      {"detector_min_recall", &RunConfig::detector_min_recall, "train-detector fails below this held-out recall"},
      {"eval_view_lo", &RunConfig::eval_view_lo, "lowest evaluation view angle (degrees)"},
      {"eval_view_hi", &RunConfig::eval_view_hi, "highest evaluation view angle (degrees)"},
      {"sweep", &RunConfig::sweep, "evaluate all views in [-50, 50]"},
      {"smoke", &RunConfig::smoke, "render and score a single frame only"},
      {"gallery", &RunConfig::gallery, "run the shape/size gallery"},
      {"gallery_shapes", &RunConfig::gallery_shapes, "glyphs used by the gallery"},
      {"gallery_scales", &RunConfig::gallery_scales, "logo scales used by the gallery"},
      {"gallery_epochs", &RunConfig::gallery_epochs, "attack epochs per gallery cell"},
      {"texture_path", &RunConfig::texture_path, "texture evaluated by eval (default <out_dir>/texture.png)"},
  };
  return kFields;
}

}  // namespace

std::string RunConfig::weights_path() const {
  return detector_weights.empty() ? out_dir + "/detector.bin" : detector_weights;
}

std::string RunConfig::eval_texture_path() const {
  return texture_path.empty() ? out_dir + "/texture.png" : texture_path;
}

void RunConfig::validate() const {
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (image_size < 16 || image_size % 16 != 0) throw ConfigError("image_size must be a multiple of 16");
  if (texture_size < 8) throw ConfigError("texture_size must be >= 8");
  if (!(logo_scale > 0 && logo_scale <= 1)) throw ConfigError("logo_scale must lie in (0,1]");
  if (train_meshes.empty() || test_meshes.empty()) throw ConfigError("mesh lists must be non-empty");
  if (train_view_lo > train_view_hi || eval_view_lo > eval_view_hi) throw ConfigError("view range reversed");
  if (n_backgrounds < 1 || n_test_backgrounds < 1) throw ConfigError("background counts must be >= 1");
  if (detector_scenes < 2 || detector_epochs < 0 || detector_batch < 1 || !(detector_lr > 0) ||
      !(detector_label_smoothing >= 0 && detector_label_smoothing < 0.5)) {
    throw ConfigError("bad detector training settings");
  }
  if (snapshot_every < 0 || gallery_epochs < 0) throw ConfigError("negative epoch count");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.name);
  return keys;
}

void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return key == f.name; });
    if (it == fs.end()) throw ConfigError("unknown config key: " + key);
    try {
      std::visit(
          [&](auto member) {
            using T = std::remove_reference_t<decltype(cfg.*member)>;
            if constexpr (std::is_same_v<T, std::uint64_t> || std::is_same_v<T, int>) {
              if (!value.is_number_integer()) throw ConfigError("config key " + key + " expects an integer");
            }
            cfg.*member = value.get<T>();
          },
          it->member);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key " + key + ": " + e.what());
    }
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  RunConfig cfg;
  apply_json(cfg, j);
  return cfg;
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  for (const auto& f : fields()) std::visit([&](auto member) { j[f.name] = cfg.*member; }, f.member);
  return j;
}

void add_flags(CLI::App& app, RunConfig& cfg) {
  for (const auto& f : fields()) {
    const std::string flag = std::string("--") + f.name;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          if constexpr (std::is_same_v<T, bool>) {
            app.add_flag(flag, cfg.*member, f.help);
          } else if constexpr (std::is_same_v<T, std::vector<std::string>> ||
                               std::is_same_v<T, std::vector<double>>) {
            app.add_option(flag, cfg.*member, f.help)->delimiter(',')->capture_default_str();
          } else {
            app.add_option(flag, cfg.*member, f.help)->capture_default_str();
          }
        },
        f.member);
  }
}

}  // namespace advlogo::cli
