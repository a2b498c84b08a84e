#pragma once

#include <cmath>
#include <functional>

#include "advlogo/detector.hpp"
#include "advlogo/harness.hpp"
#include "advlogo/random.hpp"
#include "advlogo/tensor.hpp"

namespace advlogo::test {

inline Tensor random_tensor(Tensor::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline Image random_image(int w, int h, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Image img(w, h);
  for (Eigen::Index i = 0; i < img.rgb.size(); ++i) img.rgb.data()[i] = rng.uniform(lo, hi);
  return img;
}

// |a - b| <= rel * max(|a|, |b|) + abs_floor
inline bool close_rel(double a, double b, double rel, double abs_floor = 1e-9) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

inline double central_difference(const std::function<double(double)>& f, double x, double eps) {
  return (f(x + eps) - f(x - eps)) / (2 * eps);
}

// Small detector trained on a few hundred scenes; enough for directional
// attack checks in unit tests. Built once per process.
inline const DetectorModel& quick_detector() {
  static const DetectorModel model = [] {
    const auto proxies = standard_proxies();
    DetectorDataOptions o;
    o.scenes = 600;
    o.seed = 11;
    const auto data = make_detector_dataset(proxies, o);
    DetectorModel m = DetectorModel::random(11);
    DetectorTrainOptions t;
    t.epochs = 10;
    t.lr = 5e-3;
    t.seed = 11;
    train_detector(m, data, t);
    return m;
  }();
  return model;
}

}  // namespace advlogo::test
