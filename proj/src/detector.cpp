#include "advlogo/detector.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "advlogo/adam.hpp"
#include "advlogo/errors.hpp"
#include "advlogo/parallel.hpp"
#include "advlogo/random.hpp"

namespace advlogo {

namespace {

std::uint64_t next_model_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter++;
}

std::vector<Tensor> allocate_weights(const DetectorArch& arch) {
  std::vector<Tensor> w;
  int in = 3;
  for (int out : arch.channels) {
    w.emplace_back(Tensor::Shape{out, in, 3, 3});
    w.emplace_back(Tensor::Shape{out});
    in = out;
  }
  w.emplace_back(Tensor::Shape{kHeadOutputs, in, 1, 1});
  w.emplace_back(Tensor::Shape{kHeadOutputs});
  return w;
}

int cell_of(double v, int grid) {
  return std::clamp(static_cast<int>(std::floor(v * grid)), 0, grid - 1);
}


}  // namespace

DetectorModel::DetectorModel(const DetectorArch& arch)
    : arch_(arch), weights_(allocate_weights(arch)), id_(next_model_id()) {}

DetectorModel DetectorModel::random(std::uint64_t seed, const DetectorArch& arch) {
  DetectorModel model(arch);
  Rng rng(seed, Stream::kDetectorInit);
  for (std::size_t k = 0; k < model.weights_.size(); k += 2) {
    Tensor& kernel = model.weights_[k];
    const double fan_in = static_cast<double>(kernel.dim(1) * kernel.dim(2) * kernel.dim(3));
    const bool head = k + 2 == model.weights_.size();
    const double stddev = head ? 0.01 : std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < kernel.size(); ++i) kernel[i] = stddev * rng.normal();
  }
  return model;
}

DetectorModel DetectorModel::from_weights(std::vector<Tensor> weights, double slope) {
  if (weights.size() != 10) throw DimensionError("detector weights: expected 10 tensors");
  DetectorArch arch;
  arch.slope = slope;
  for (int l = 0; l < 4; ++l) arch.channels[static_cast<std::size_t>(l)] = static_cast<int>(weights[2 * l].dim(0));
  DetectorModel model(arch);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].shape() != model.weights_[k].shape()) {
      throw DimensionError("detector weights: tensor " + std::to_string(k) + " has shape " +
                           Tensor::shape_string(weights[k].shape()));
    }
    ops::require_finite(weights[k], "detector weights");
  }
  model.weights_ = std::move(weights);
  return model;
}

std::vector<Tensor>& DetectorModel::mutable_weights() {
  ++version_;
  return weights_;
}

ForwardPass forward(const DetectorModel& model, const Image& image, GradMode mode) {
  if (image.width != image.height || image.width % kDetectorStride != 0 || image.width == 0) {
    throw DimensionError("detector input must be square with side divisible by 16");
  }
  if (!image.in_unit_range()) throw DomainError("detector input outside [0,1]");
  ForwardPass pass;
  pass.model_id = model.id();
  pass.model_version = model.version();
  pass.grid = image.width / kDetectorStride;
  Tape& t = pass.tape;
  pass.input = t.input(to_tensor(image), mode == GradMode::kInput);
  for (const Tensor& w : model.weights()) pass.weights.push_back(t.input(w, mode == GradMode::kWeights));

  Tape::Var x = pass.input;
  for (int l = 0; l < 4; ++l) {
    x = t.conv2d(x, pass.weights[2 * l], pass.weights[2 * l + 1], 2, 1);
    x = t.leaky_relu(x, model.arch().slope);
  }
  pass.logits = t.conv2d(x, pass.weights[8], pass.weights[9], 1, 0);
  pass.outputs = t.sigmoid(pass.logits);

  const Tensor& out = t.value(pass.outputs);
  const int s = pass.grid;
  pass.detections.reserve(static_cast<std::size_t>(s * s));
  for (int row = 0; row < s; ++row) {
    for (int col = 0; col < s; ++col) {
      Detection d;
      d.cell = row * s + col;
      d.box = Box{(col + out.at(0, row, col)) / s, (row + out.at(1, row, col)) / s,
                  out.at(2, row, col), out.at(3, row, col)};
      d.confidence = out.at(4, row, col);
      pass.detections.push_back(d);
    }
  }
  return pass;
}

Image backward_to_image(const DetectorModel& model, ForwardPass& pass,
                        std::span<const double> grad_on_confidences) {
  if (pass.consumed) throw StateError("detector tape already used for backward");
  if (pass.model_id != model.id() || pass.model_version != model.version()) {
    throw StateError("detector tape is stale: model changed since forward");
  }
  if (!pass.tape.needs(pass.input)) throw StateError("forward pass did not record input gradients");
  const int s = pass.grid;
  if (grad_on_confidences.size() != static_cast<std::size_t>(s * s)) {
    throw DimensionError("backward_to_image: one gradient per grid cell required");
  }
  Tensor seed({kHeadOutputs, s, s});
  for (int cell = 0; cell < s * s; ++cell) seed.at(4, cell / s, cell % s) = grad_on_confidences[static_cast<std::size_t>(cell)];
  pass.consumed = true;
  pass.tape.backward(pass.outputs, seed);
  return from_tensor(pass.tape.grad(pass.input));
}

std::vector<Detection> filter_detections(const std::vector<Detection>& all, double threshold) {
  std::vector<Detection> kept;
  for (const auto& d : all) {
    if (d.confidence > threshold) kept.push_back(d);
  }
  return kept;
}

std::vector<Detection> detect(const DetectorModel& model, const Image& image, double threshold) {
  if (!(threshold > 0 && threshold < 1)) throw DomainError("detect: threshold must lie in (0,1)");
  return filter_detections(forward(model, image).detections, threshold);
}

DetectorMetrics evaluate_detector(const DetectorModel& model, std::span<const LabeledImage> data,
                                  double threshold, int jobs) {
  std::vector<char> hit(data.size());
  parallel_for(data.size(), jobs, [&](std::size_t i) {
    hit[i] = !detect(model, data[i].image, threshold).empty();
  });
  DetectorMetrics m;
  int tp = 0, fp = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].box) {
      ++m.held_out_positives;
      tp += hit[i];
    } else {
      ++m.held_out_negatives;
      fp += hit[i];
    }
  }
  m.recall = m.held_out_positives ? static_cast<double>(tp) / m.held_out_positives : 0.0;
  m.false_positive_rate = m.held_out_negatives ? static_cast<double>(fp) / m.held_out_negatives : 0.0;
  return m;
}

namespace {

struct ImageGrad {
  std::vector<Tensor> weights;
  double loss = 0.0;
};

ImageGrad image_gradient(const DetectorModel& model, const LabeledImage& sample,
                         const DetectorTrainOptions& opt) {
  ForwardPass pass = forward(model, sample.image, GradMode::kWeights);
  const Tensor& p = pass.tape.value(pass.outputs);
  const int s = pass.grid;
  int pos_cell = -1;
  if (sample.box) pos_cell = cell_of(sample.box->cy, s) * s + cell_of(sample.box->cx, s);

  Tensor seed({kHeadOutputs, s, s});
  double loss = 0.0;
  constexpr double kEps = 1e-12;
  for (int row = 0; row < s; ++row) {
    for (int col = 0; col < s; ++col) {
      const bool positive = row * s + col == pos_cell;
      // Cells next to the box centre see nearly the same content as the
      // assigned one; they are left out of the confidence loss.
      if (!positive && sample.box && std::abs(col + 0.5 - sample.box->cx * s) < 1.0 &&
          std::abs(row + 0.5 - sample.box->cy * s) < 1.0) {
        continue;
      }
      const double w = positive ? opt.positive_weight : 1.0;
      const double conf = p.at(4, row, col);
      const double t = positive ? 1.0 - opt.label_smoothing : opt.label_smoothing;
      loss -= w * (t * std::log(conf + kEps) + (1.0 - t) * std::log(1.0 - conf + kEps));
      seed.at(4, row, col) = w * (conf - t);
      if (!positive) continue;
      const Box& b = *sample.box;
      const double target[4] = {b.cx * s - col, b.cy * s - row, b.w, b.h};
      for (int k = 0; k < 4; ++k) {
        const double v = p.at(k, row, col);
        loss += opt.box_weight * (v - target[k]) * (v - target[k]);
        seed.at(k, row, col) = opt.box_weight * 2.0 * (v - target[k]) * v * (1.0 - v);
      }
    }
  }
  pass.tape.backward(pass.logits, seed);
  ImageGrad g;
  g.loss = loss;
  for (auto w : pass.weights) g.weights.push_back(pass.tape.grad(w));
  return g;
}

}  // namespace

DetectorMetrics train_detector(DetectorModel& model, std::span<const LabeledImage> dataset,
                               const DetectorTrainOptions& opt) {
  if (dataset.empty()) throw DomainError("train_detector: empty dataset");
  const bool has_pos = std::any_of(dataset.begin(), dataset.end(), [](const auto& d) { return d.box.has_value(); });
  const bool has_neg = std::any_of(dataset.begin(), dataset.end(), [](const auto& d) { return !d.box.has_value(); });
  if (!has_pos || !has_neg) throw DomainError("train_detector: need positive and negative scenes");
  if (opt.epochs < 0 || opt.batch_size < 1 || !(opt.lr > 0) ||
      !(opt.label_smoothing >= 0 && opt.label_smoothing < 0.5)) {
    throw DomainError("train_detector: bad options");
  }

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng(opt.seed, Stream::kDetectorShuffle, 0).shuffle(order);
  const auto n_hold = static_cast<std::size_t>(std::floor(opt.holdout_fraction * static_cast<double>(dataset.size())));
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_hold));
  std::vector<LabeledImage> held;
  for (std::size_t i = order.size() - n_hold; i < order.size(); ++i) held.push_back(dataset[order[i]]);
  if (train.empty()) throw DomainError("train_detector: hold-out leaves no training data");

  DetectorMetrics metrics;
  std::vector<Eigen::ArrayXd> m1, m2;
  for (const auto& w : model.weights()) {
    m1.push_back(Eigen::ArrayXd::Zero(w.size()));
    m2.push_back(Eigen::ArrayXd::Zero(w.size()));
  }
  std::int64_t step = 0;
  AdamParams adam;
  const int drop_epoch = static_cast<int>(std::ceil(opt.lr_drop_at * opt.epochs));
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const double lr = epoch >= drop_epoch ? opt.lr * opt.lr_drop : opt.lr;
    Rng(opt.seed, Stream::kDetectorShuffle, static_cast<std::uint64_t>(epoch) + 1).shuffle(train);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end = std::min(train.size(), start + static_cast<std::size_t>(opt.batch_size));
      std::vector<ImageGrad> grads(end - start);
      parallel_for(grads.size(), opt.jobs, [&](std::size_t i) {
        grads[i] = image_gradient(model, dataset[train[start + i]], opt);
      });
      const double inv = 1.0 / static_cast<double>(grads.size());
      ++step;
      auto& weights = model.mutable_weights();
      for (std::size_t k = 0; k < weights.size(); ++k) {
        Eigen::ArrayXd g = Eigen::ArrayXd::Zero(weights[k].size());
        for (const auto& ig : grads) g += ig.weights[k].data();
        g *= inv;
        adam_update(g, m1[k], m2[k], weights[k].data(), step, lr, adam);
        ops::require_finite(weights[k], "train_detector");
      }
      for (const auto& ig : grads) epoch_loss += ig.loss;
    }
    metrics.epoch_loss.push_back(epoch_loss / static_cast<double>(train.size()));
  }
  const DetectorMetrics eval = evaluate_detector(model, held.empty() ? std::span<const LabeledImage>(dataset) : std::span<const LabeledImage>(held), opt.threshold, opt.jobs);
  metrics.recall = eval.recall;
  metrics.false_positive_rate = eval.false_positive_rate;
  metrics.held_out_positives = eval.held_out_positives;
  metrics.held_out_negatives = eval.held_out_negatives;
  return metrics;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw ParseError("weights file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_weights(const DetectorModel& model) {
  std::vector<std::uint8_t> out = {'L', 'C', 'D', '1'};
  put_u32(out, static_cast<std::uint32_t>(model.weights().size()));
  for (const Tensor& t : model.weights()) {
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const float f = static_cast<float>(t[i]);
      std::uint32_t bits = 0;
      std::memcpy(&bits, &f, sizeof(bits));
      put_u32(out, bits);
    }
  }
  return out;
}

DetectorModel deserialize_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "LCD1", 4) != 0) {
    throw ParseError("weights file: bad magic");
  }
  std::size_t pos = 4;
  const std::uint32_t count = get_u32(bytes, pos);
  if (count > 1024) throw ParseError("weights file: implausible tensor count");
  std::vector<Tensor> tensors;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t rank = get_u32(bytes, pos);
    if (rank > 8) throw ParseError("weights file: implausible rank");
    Tensor::Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get_u32(bytes, pos));
    Tensor t(shape);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const std::uint32_t bits = get_u32(bytes, pos);
      float f = 0;
      std::memcpy(&f, &bits, sizeof(f));
      t[i] = f;
    }
    tensors.push_back(std::move(t));
  }
  if (pos != bytes.size()) throw ParseError("weights file: trailing bytes");
  return DetectorModel::from_weights(std::move(tensors));
}

void save_weights(const std::string& path, const DetectorModel& model) {
  const auto bytes = serialize_weights(model);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

DetectorModel load_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize_weights(bytes);
}

}  // namespace advlogo
