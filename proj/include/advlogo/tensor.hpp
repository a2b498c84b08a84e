#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "advlogo/errors.hpp"

namespace advlogo {

// Dense row-major tensor. Shape is a list of extents; data is a flat Eigen
// array whose length is the product of the extents.
template <typename Scalar_>
class BasicTensor {
 public:
  using Scalar = Scalar_;
  using Index = Eigen::Index;
  using Shape = std::vector<Index>;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    data_ = Array::Zero(product(shape_));
  }

  BasicTensor(Shape shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != product(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  BasicTensor(Shape shape, std::initializer_list<Scalar> values) : shape_(std::move(shape)) {
    data_.resize(static_cast<Index>(values.size()));
    std::copy(values.begin(), values.end(), data_.begin());
    if (data_.size() != product(shape_)) {
      throw DimensionError("tensor literal length does not match shape " + shape_string(shape_));
    }
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape)); }

  static BasicTensor constant(Shape shape, Scalar value) {
    BasicTensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  static BasicTensor zeros_like(const BasicTensor& other) { return BasicTensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Array& data() { return data_; }
  const Array& data() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  // Rank-3 accessors for [C, H, W] tensors.
  Scalar& at(Index c, Index y, Index x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
  Scalar at(Index c, Index y, Index x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  bool all_finite() const { return data_.isFinite().all(); }

  bool same_shape(const BasicTensor& other) const { return shape_ == other.shape_; }

  template <typename Other>
  BasicTensor<Other> cast() const {
    return BasicTensor<Other>(shape_, data_.template cast<Other>());
  }

  static Index product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
  }

  static std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
  }

 private:
  Shape shape_;
  Array data_;
};

using Tensor = BasicTensor<double>;
using TensorF = BasicTensor<float>;

namespace ops {

template <typename Scalar>
void require_finite(const BasicTensor<Scalar>& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite value");
}

template <typename Scalar>
void require_same_shape(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b,
                        const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape " +
                         BasicTensor<Scalar>::shape_string(a.shape()) + " vs " +
                         BasicTensor<Scalar>::shape_string(b.shape()));
  }
}

// ---------------------------------------------------------------------------
// conv2d: cross-correlation over a [C,H,W] input with a [K,C,kh,kw] kernel.
// Implemented as an im2col patch matrix times the kernel matrix.

struct ConvGeometry {
  Eigen::Index channels, height, width;
  Eigen::Index filters, kernel_h, kernel_w;
  Eigen::Index out_h, out_w;
  int stride, pad;
};

template <typename Scalar>
ConvGeometry conv_geometry(const BasicTensor<Scalar>& input, const BasicTensor<Scalar>& kernel,
                           int stride, int pad) {
  if (input.rank() != 3 || kernel.rank() != 4) {
    throw DimensionError("conv2d: expected input [C,H,W] and kernel [K,C,kh,kw]");
  }
  if (stride < 1 || pad < 0) throw DomainError("conv2d: stride must be >= 1 and pad >= 0");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), kernel.dim(0), kernel.dim(2),
                 kernel.dim(3), 0, 0, stride, pad};
  if (kernel.dim(1) != g.channels) {
    throw DimensionError("conv2d: kernel channels " + std::to_string(kernel.dim(1)) +
                         " != input channels " + std::to_string(g.channels));
  }
  if (g.kernel_h > g.height + 2 * pad || g.kernel_w > g.width + 2 * pad) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }
  g.out_h = (g.height + 2 * pad - g.kernel_h) / stride + 1;
  g.out_w = (g.width + 2 * pad - g.kernel_w) / stride + 1;
  return g;
}

// Patch matrix, one row per output position, one column per (c, ky, kx).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> im2col(const BasicTensor<Scalar>& input,
                                                             const ConvGeometry& g) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> patches(g.out_h * g.out_w,
                                                                g.channels * g.kernel_h * g.kernel_w);
  for (Eigen::Index c = 0; c < g.channels; ++c) {
    for (Eigen::Index ky = 0; ky < g.kernel_h; ++ky) {
      for (Eigen::Index kx = 0; kx < g.kernel_w; ++kx) {
        auto col = patches.col((c * g.kernel_h + ky) * g.kernel_w + kx);
        for (Eigen::Index oy = 0; oy < g.out_h; ++oy) {
          const Eigen::Index y = oy * g.stride + ky - g.pad;
          for (Eigen::Index ox = 0; ox < g.out_w; ++ox) {
            const Eigen::Index x = ox * g.stride + kx - g.pad;
            const bool inside = y >= 0 && y < g.height && x >= 0 && x < g.width;
            col[oy * g.out_w + ox] = inside ? input.at(c, y, x) : Scalar(0);
          }
        }
      }
    }
  }
  return patches;
}

template <typename Scalar>
BasicTensor<Scalar> conv2d(const BasicTensor<Scalar>& input, const BasicTensor<Scalar>& kernel,
                           const BasicTensor<Scalar>* bias, int stride, int pad) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const ConvGeometry g = conv_geometry(input, kernel, stride, pad);
  if (bias && (bias->rank() != 1 || bias->dim(0) != g.filters)) {
    throw DimensionError("conv2d: bias must have shape [K]");
  }
  const Mat patches = im2col(input, g);
  const Eigen::Map<const Mat> weights(kernel.data().data(), g.channels * g.kernel_h * g.kernel_w,
                                      g.filters);
  BasicTensor<Scalar> out({g.filters, g.out_h, g.out_w});
  Eigen::Map<Mat> out_map(out.data().data(), g.out_h * g.out_w, g.filters);
  out_map.noalias() = patches * weights;
  if (bias) out_map.rowwise() += bias->data().matrix().transpose();
  require_finite(out, "conv2d");
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> conv2d(const BasicTensor<Scalar>& input, const BasicTensor<Scalar>& kernel,
                           int stride, int pad) {
  return conv2d<Scalar>(input, kernel, nullptr, stride, pad);
}

template <typename Scalar>
struct Conv2dGrads {
  BasicTensor<Scalar> input;
  BasicTensor<Scalar> kernel;
  BasicTensor<Scalar> bias;
};

// Vector-Jacobian product of conv2d. Gradients that are not requested are
// left empty.
template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const BasicTensor<Scalar>& input,
                                    const BasicTensor<Scalar>& kernel,
                                    const BasicTensor<Scalar>& out_grad, int stride, int pad,
                                    bool want_input, bool want_kernel) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const ConvGeometry g = conv_geometry(input, kernel, stride, pad);
  if (out_grad.shape() != typename BasicTensor<Scalar>::Shape{g.filters, g.out_h, g.out_w}) {
    throw DimensionError("conv2d_backward: output gradient shape mismatch");
  }
  const Eigen::Index patch = g.channels * g.kernel_h * g.kernel_w;
  const Eigen::Map<const Mat> grad_map(out_grad.data().data(), g.out_h * g.out_w, g.filters);
  Conv2dGrads<Scalar> grads;
  if (want_kernel) {
    const Mat patches = im2col(input, g);
    grads.kernel = BasicTensor<Scalar>(kernel.shape());
    Eigen::Map<Mat>(grads.kernel.data().data(), patch, g.filters).noalias() =
        patches.transpose() * grad_map;
    grads.bias = BasicTensor<Scalar>({g.filters});
    grads.bias.data() = grad_map.colwise().sum().transpose().array();
  }
  if (want_input) {
    const Eigen::Map<const Mat> weights(kernel.data().data(), patch, g.filters);
    const Mat patch_grad = grad_map * weights.transpose();
    grads.input = BasicTensor<Scalar>(input.shape());
    for (Eigen::Index c = 0; c < g.channels; ++c) {
      for (Eigen::Index ky = 0; ky < g.kernel_h; ++ky) {
        for (Eigen::Index kx = 0; kx < g.kernel_w; ++kx) {
          const auto col = patch_grad.col((c * g.kernel_h + ky) * g.kernel_w + kx);
          for (Eigen::Index oy = 0; oy < g.out_h; ++oy) {
            const Eigen::Index y = oy * g.stride + ky - g.pad;
            if (y < 0 || y >= g.height) continue;
            for (Eigen::Index ox = 0; ox < g.out_w; ++ox) {
              const Eigen::Index x = ox * g.stride + kx - g.pad;
              if (x < 0 || x >= g.width) continue;
              grads.input.at(c, y, x) += col[oy * g.out_w + ox];
            }
          }
        }
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Elementwise primitives.

template <typename Scalar>
BasicTensor<Scalar> leaky_relu(const BasicTensor<Scalar>& x, Scalar slope) {
  if (!(slope >= 0 && slope < 1)) throw DomainError("leaky_relu: slope must lie in [0,1)");
  BasicTensor<Scalar> y(x.shape(), x.data().max(slope * x.data()));
  require_finite(y, "leaky_relu");
  return y;
}

template <typename Scalar>
BasicTensor<Scalar> leaky_relu_backward(const BasicTensor<Scalar>& x, Scalar slope,
                                        const BasicTensor<Scalar>& g) {
  require_same_shape(x, g, "leaky_relu_backward");
  return BasicTensor<Scalar>(x.shape(), (x.data() > 0).select(g.data(), slope * g.data()));
}

template <typename Scalar>
BasicTensor<Scalar> sigmoid(const BasicTensor<Scalar>& x) {
  BasicTensor<Scalar> y(x.shape(), Scalar(1) / (Scalar(1) + (-x.data()).exp()));
  require_finite(y, "sigmoid");
  return y;
}

// Takes the forward output y = sigmoid(x).
template <typename Scalar>
BasicTensor<Scalar> sigmoid_backward(const BasicTensor<Scalar>& y, const BasicTensor<Scalar>& g) {
  require_same_shape(y, g, "sigmoid_backward");
  return BasicTensor<Scalar>(y.shape(), g.data() * y.data() * (Scalar(1) - y.data()));
}

template <typename Scalar>
BasicTensor<Scalar> affine(const BasicTensor<Scalar>& x, Scalar scale, Scalar shift) {
  BasicTensor<Scalar> y(x.shape(), scale * x.data() + shift);
  require_finite(y, "affine");
  return y;
}

template <typename Scalar>
BasicTensor<Scalar> affine_backward(Scalar scale, const BasicTensor<Scalar>& g) {
  return BasicTensor<Scalar>(g.shape(), scale * g.data());
}

template <typename Scalar>
BasicTensor<Scalar> add(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  require_same_shape(a, b, "add");
  BasicTensor<Scalar> y(a.shape(), a.data() + b.data());
  require_finite(y, "add");
  return y;
}

template <typename Scalar>
BasicTensor<Scalar> mul(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  require_same_shape(a, b, "mul");
  BasicTensor<Scalar> y(a.shape(), a.data() * b.data());
  require_finite(y, "mul");
  return y;
}

// Returns (d/da, d/db).
template <typename Scalar>
std::pair<BasicTensor<Scalar>, BasicTensor<Scalar>> mul_backward(const BasicTensor<Scalar>& a,
                                                                 const BasicTensor<Scalar>& b,
                                                                 const BasicTensor<Scalar>& g) {
  require_same_shape(a, g, "mul_backward");
  return {BasicTensor<Scalar>(a.shape(), g.data() * b.data()),
          BasicTensor<Scalar>(b.shape(), g.data() * a.data())};
}

template <typename Scalar>
BasicTensor<Scalar> clamp01(const BasicTensor<Scalar>& x) {
  require_finite(x, "clamp01");
  return BasicTensor<Scalar>(x.shape(), x.data().max(Scalar(0)).min(Scalar(1)));
}

// Gradient passes only where the input lies strictly inside (0, 1).
template <typename Scalar>
BasicTensor<Scalar> clamp01_backward(const BasicTensor<Scalar>& x, const BasicTensor<Scalar>& g) {
  require_same_shape(x, g, "clamp01_backward");
  return BasicTensor<Scalar>(
      x.shape(), (x.data() > Scalar(0) && x.data() < Scalar(1)).select(g.data(), Scalar(0)));
}

template <typename Scalar>
struct MaxResult {
  Scalar value;
  Eigen::Index index;
};

// First index wins on ties.
template <typename Scalar>
MaxResult<Scalar> reduce_max(const BasicTensor<Scalar>& x) {
  if (x.empty()) throw DomainError("reduce_max: empty tensor");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    if (x[i] > x[best]) best = i;
  }
  return {x[best], best};
}

template <typename Scalar>
BasicTensor<Scalar> reduce_max_backward(const typename BasicTensor<Scalar>::Shape& shape,
                                        Eigen::Index argmax, Scalar g) {
  BasicTensor<Scalar> grad(shape);
  grad[argmax] = g;
  return grad;
}

}  // namespace ops
}  // namespace advlogo
