#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advlogo/box.hpp"
#include "advlogo/image.hpp"
#include "advlogo/tape.hpp"
#include "advlogo/tensor.hpp"

namespace advlogo {

// Backbone of four stride-2 3x3 convolutions with leaky ReLU, then a 1x1
// head emitting (tx, ty, tw, th, conf_logit) per cell of an S x S grid,
// S = image_size / 16.
struct DetectorArch {
  std::array<int, 4> channels{16, 32, 32, 32};
  double slope = 0.1;
};

inline constexpr int kDetectorStride = 16;
inline constexpr int kHeadOutputs = 5;

class DetectorModel {
 public:
  explicit DetectorModel(const DetectorArch& arch = {});

  // He-normal kernels, zero biases, drawn from the seed.
  static DetectorModel random(std::uint64_t seed, const DetectorArch& arch = {});
  // Builds a model around loaded weights, inferring channel widths.
  static DetectorModel from_weights(std::vector<Tensor> weights, double slope = 0.1);

  const DetectorArch& arch() const { return arch_; }
  // Order: conv1.kernel, conv1.bias, ..., conv4.bias, head.kernel, head.bias.
  const std::vector<Tensor>& weights() const { return weights_; }
  // Mutable access bumps the version so outstanding tapes become stale.
  std::vector<Tensor>& mutable_weights();

  std::uint64_t id() const { return id_; }
  std::uint64_t version() const { return version_; }

 private:
  DetectorArch arch_;
  std::vector<Tensor> weights_;
  std::uint64_t id_;
  std::uint64_t version_ = 0;
};

struct Detection {
  Box box;
  double confidence = 0.0;
  int cell = 0;  // row * S + col
};

// A forward pass with its recorded tape.
struct ForwardPass {
  Tape tape;
  Tape::Var input;
  std::vector<Tape::Var> weights;
  Tape::Var logits;   // [5, S, S]
  Tape::Var outputs;  // sigmoid(logits)
  int grid = 0;
  std::vector<Detection> detections;
  std::uint64_t model_id = 0;
  std::uint64_t model_version = 0;
  bool consumed = false;
};

// Which leaves of the tape receive gradients.
enum class GradMode { kInput, kWeights };

// Decodes all S^2 cells.
ForwardPass forward(const DetectorModel& model, const Image& image,
                    GradMode mode = GradMode::kInput);

// Exact gradient of sum_i g_i * confidence_i with respect to input pixels.
// A tape serves one backward call and must come from the current model
// version.
Image backward_to_image(const DetectorModel& model, ForwardPass& pass,
                        std::span<const double> grad_on_confidences);

// Detections whose confidence is strictly above the threshold.
std::vector<Detection> detect(const DetectorModel& model, const Image& image, double threshold);
std::vector<Detection> filter_detections(const std::vector<Detection>& all, double threshold);

struct LabeledImage {
  Image image;
  std::optional<Box> box;  // person bounding rectangle, none for negatives
};

struct DetectorTrainOptions {
  int epochs = 16;
  double lr = 4e-3;
  // lr is multiplied by lr_drop from epoch ceil(lr_drop_at * epochs) on.
  double lr_drop_at = 0.75;
  double lr_drop = 0.1;
  std::uint64_t seed = 0;
  int batch_size = 16;
  double holdout_fraction = 0.2;
  double threshold = 0.6;
  double positive_weight = 4.0;
  double box_weight = 5.0;
  // Confidence targets are 1 - label_smoothing and label_smoothing.
  double label_smoothing = 0.1;
  int jobs = 1;
};

struct DetectorMetrics {
  std::vector<double> epoch_loss;
  double recall = 0.0;
  double false_positive_rate = 0.0;
  int held_out_positives = 0;
  int held_out_negatives = 0;
};

// Recall = positives with >= 1 detection; FP rate = negatives with >= 1.
DetectorMetrics evaluate_detector(const DetectorModel& model, std::span<const LabeledImage> data,
                                  double threshold, int jobs = 1);

// Adam on BCE(confidence) plus squared box error on the cell holding the
// box centre; other cells within one cell of the centre are ignored. Holds out a seeded fraction of the data for the metrics.
DetectorMetrics train_detector(DetectorModel& model, std::span<const LabeledImage> dataset,
                               const DetectorTrainOptions& options);

// "LCD1", u32 tensor count, then per tensor u32 rank, u32 dims, f32 data;
// little endian.
std::vector<std::uint8_t> serialize_weights(const DetectorModel& model);
DetectorModel deserialize_weights(std::span<const std::uint8_t> bytes);
void save_weights(const std::string& path, const DetectorModel& model);
DetectorModel load_weights(const std::string& path);

}  // namespace advlogo
