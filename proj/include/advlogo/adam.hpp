#pragma once

#include <cmath>
#include <cstdint>

namespace advlogo {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update in place. `step` is the 1-based step count
// after this update. Works on any Eigen array expression type.
template <typename T>
void adam_update(const T& grad, T& mom1, T& mom2, T& x, std::int64_t step, double lr,
                 const AdamParams& p) {
  mom1 = p.beta1 * mom1 + (1 - p.beta1) * grad;
  mom2 = p.beta2 * mom2 + (1 - p.beta2) * grad * grad;
  const double corr1 = 1 - std::pow(p.beta1, static_cast<double>(step));
  const double corr2 = 1 - std::pow(p.beta2, static_cast<double>(step));
  x -= lr * (mom1 / corr1) / ((mom2 / corr2).sqrt() + p.epsilon);
}

}  // namespace advlogo
