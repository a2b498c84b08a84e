#include <doctest.h>

#include <filesystem>

#include "advlogo/detector.hpp"
#include "advlogo/errors.hpp"
#include "support.hpp"

using namespace advlogo;

namespace {

DetectorModel zero_model() {
  DetectorModel m;
  for (auto& w : m.mutable_weights()) w.data().setZero();
  return m;
}

// Composes the tensor ops by hand, without the tape.
std::vector<Detection> manual_forward(const DetectorModel& model, const Image& image) {
  const auto& w = model.weights();
  Tensor x = to_tensor(image);
  for (int l = 0; l < 4; ++l) x = ops::leaky_relu(ops::conv2d(x, w[2 * l], &w[2 * l + 1], 2, 1), model.arch().slope);
  const Tensor out = ops::sigmoid(ops::conv2d(x, w[8], &w[9], 1, 0));
  const auto s = static_cast<int>(out.dim(1));
  std::vector<Detection> dets;
  for (int row = 0; row < s; ++row)
    for (int col = 0; col < s; ++col)
      dets.push_back({Box{(col + out.at(0, row, col)) / s, (row + out.at(1, row, col)) / s, out.at(2, row, col),
                          out.at(3, row, col)},
                      out.at(4, row, col), row * s + col});
  return dets;
}

Detection with_conf(double c) {
  Detection d;
  d.confidence = c;
  return d;
}

}  // namespace

TEST_SUITE("detector") {

TEST_CASE("zero weights: every confidence 0.5, boxes centred in cells") {
  const DetectorModel m = zero_model();
  Rng rng(51);
  const ForwardPass p = forward(m, test::random_image(64, 64, rng));
  REQUIRE(p.detections.size() == 16);
  for (const auto& d : p.detections) {
    CHECK(d.confidence == 0.5);
    CHECK(d.box.w == 0.5);
    CHECK(d.box.h == 0.5);
    CHECK(d.box.cx == doctest::Approx((d.cell % 4 + 0.5) / 4));
    CHECK(d.box.cy == doctest::Approx((d.cell / 4 + 0.5) / 4));
  }
  Image zeros(64, 64), ones(64, 64);
  ones.rgb.setOnes();
  const auto a = forward(m, zeros).detections, b = forward(m, ones).detections;
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].confidence == b[i].confidence);
}

TEST_CASE("forward matches a hand composition of tensor ops") {
  Rng rng(52);
  DetectorModel m = DetectorModel::random(52);
  for (auto& w : m.mutable_weights())
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] += 0.05 * rng.normal();
  const Image img = test::random_image(64, 64, rng);
  const auto a = forward(m, img).detections;
  const auto b = manual_forward(m, img);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].confidence == b[i].confidence);
    CHECK(a[i].box.cx == b[i].box.cx);
    CHECK(a[i].box.h == b[i].box.h);
  }
  const auto again = forward(m, img).detections;
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].confidence == again[i].confidence);
}

TEST_CASE("input validation") {
  const DetectorModel m = DetectorModel::random(1);
  CHECK_THROWS_AS(forward(m, Image(60, 60)), DimensionError);
  CHECK_THROWS_AS(forward(m, Image(64, 32)), DimensionError);
  Image bad(32, 32);
  bad.rgb(0, 0) = 1.5;
  CHECK_THROWS_AS(forward(m, bad), DomainError);
  CHECK_THROWS_AS(detect(m, Image(32, 32), 1.0), DomainError);
}

TEST_CASE("backward_to_image") {
  Rng rng(53);
  const DetectorModel m = DetectorModel::random(53);
  const Image img = test::random_image(32, 32, rng, 0.05, 0.95);

  ForwardPass zero_pass = forward(m, img);
  const std::vector<double> zeros(4, 0.0);
  CHECK(backward_to_image(m, zero_pass, zeros).rgb.isZero());
  CHECK_THROWS_AS(backward_to_image(m, zero_pass, zeros), StateError);

  const std::vector<double> g{0.3, -1.0, 0.7, 0.2};
  ForwardPass pass = forward(m, img);
  const Image grad = backward_to_image(m, pass, g);
  auto objective = [&](const Image& im) {
    const auto d = forward(m, im).detections;
    double s = 0;
    for (std::size_t i = 0; i < d.size(); ++i) s += g[i] * d[i].confidence;
    return s;
  };
  for (int k = 0; k < 5; ++k) {
    const auto i = static_cast<Eigen::Index>(rng.integer(0, img.rgb.size() - 1));
    Image p = img, q = img;
    p.rgb.data()[i] += 1e-3;
    q.rgb.data()[i] -= 1e-3;
    const double fd = (objective(p) - objective(q)) / 2e-3;
    CHECK(test::close_rel(grad.rgb.data()[i], fd, 1e-2, 1e-8));
  }

  // Selecting two cells gives the sum of the single-cell gradients.
  auto single = [&](std::vector<double> sel) {
    ForwardPass fp = forward(m, img);
    return backward_to_image(m, fp, sel);
  };
  const Image both = single({1, 0, 0, 1}), first = single({1, 0, 0, 0}), last = single({0, 0, 0, 1});
  CHECK(((both.rgb - first.rgb - last.rgb).abs() < 1e-12).all());

  DetectorModel changing = DetectorModel::random(54);
  ForwardPass stale = forward(changing, img);
  changing.mutable_weights();
  CHECK_THROWS_AS(backward_to_image(changing, stale, g), StateError);
  ForwardPass wrong_size = forward(m, img);
  CHECK_THROWS_AS(backward_to_image(m, wrong_size, std::vector<double>(3)), DimensionError);
}

TEST_CASE("detect threshold semantics") {
  CHECK(filter_detections({with_conf(0.55), with_conf(0.59)}, 0.6).empty());
  CHECK(filter_detections({with_conf(0.61)}, 0.6).size() == 1);
  CHECK(filter_detections({with_conf(0.6)}, 0.6).empty());
  Rng rng(55);
  const DetectorModel m = DetectorModel::random(55);
  const auto all = forward(m, test::random_image(64, 64, rng)).detections;
  std::size_t prev = all.size();
  for (double t = 0.0; t <= 1.0; t += 0.001) {
    const auto n = filter_detections(all, t).size();
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("training: overfit, zero epochs, determinism") {
  const auto proxies = standard_proxies();
  DetectorDataOptions o;
  o.scenes = 2;
  o.positive_fraction = 1.0;
  o.seed = 3;
  auto data = make_detector_dataset(proxies, o);
  LabeledImage negative{generate_background(99, 64), std::nullopt};
  std::vector<LabeledImage> set{data[0], negative};

  DetectorModel m = DetectorModel::random(5);
  const auto before = m.weights();
  DetectorTrainOptions zero;
  zero.epochs = 0;
  zero.holdout_fraction = 0;
  train_detector(m, set, zero);
  for (std::size_t k = 0; k < before.size(); ++k) CHECK((m.weights()[k].data() == before[k].data()).all());

  DetectorTrainOptions opt;
  opt.epochs = 250;  // two images per step, one step per epoch
  opt.batch_size = 2;
  opt.holdout_fraction = 0;
  opt.lr = 3e-3;
  opt.lr_drop_at = 1.0;
  opt.label_smoothing = 0.0;
  DetectorModel smoothed = m;
  train_detector(m, set, opt);
  double best = 0;
  for (const auto& d : forward(m, data[0].image).detections) best = std::max(best, d.confidence);
  CHECK(best > 0.9);

  // Smoothed targets keep the fitted confidence near 1 - label_smoothing.
  opt.label_smoothing = 0.2;
  train_detector(smoothed, set, opt);
  best = 0;
  for (const auto& d : forward(smoothed, data[0].image).detections) best = std::max(best, d.confidence);
  CHECK(best > 0.6);
  CHECK(best < 0.9);

  DetectorModel a = DetectorModel::random(6), b = DetectorModel::random(6);
  opt.epochs = 5;
  train_detector(a, set, opt);
  train_detector(b, set, opt);
  CHECK(serialize_weights(a) == serialize_weights(b));

  CHECK_THROWS_AS(train_detector(a, std::span<const LabeledImage>{}, opt), DomainError);
}

TEST_CASE("weights round-trip byte-identically") {
  const DetectorModel m = DetectorModel::random(7);
  const auto bytes = serialize_weights(m);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "LCD1");
  const DetectorModel back = deserialize_weights(bytes);
  CHECK(serialize_weights(back) == bytes);
  const auto path = (std::filesystem::temp_directory_path() / "advlogo_w.bin").string();
  save_weights(path, back);
  CHECK(serialize_weights(load_weights(path)) == bytes);
  std::filesystem::remove(path);

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(deserialize_weights(truncated), ParseError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_weights(magic), ParseError);
  std::vector<Tensor> few(3);
  CHECK_THROWS_AS(DetectorModel::from_weights(few), DimensionError);
}

}  // TEST_SUITE
