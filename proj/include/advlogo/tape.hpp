#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "advlogo/tensor.hpp"

namespace advlogo {

// Linear reverse-mode tape. Each recorded op stores its output value, an
// accumulating gradient slot, and a closure that pushes the slot's gradient
// to its inputs. Backward walks the tape in reverse recording order.
template <typename Scalar>
class BasicTape {
 public:
  using TensorT = BasicTensor<Scalar>;

  struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
    bool valid() const { return id != static_cast<std::size_t>(-1); }
  };

  // Value plus gradient accumulator for one tape entry.
  struct DualSlot {
    TensorT value;
    TensorT grad;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Var input(TensorT value, bool requires_grad = true) {
    ops::require_finite(value, "tape input");
    return push(std::move(value), requires_grad, nullptr);
  }

  const TensorT& value(Var v) const { return slot(v).value; }

  // Zero tensor when nothing reached this entry.
  TensorT grad(Var v) const {
    const DualSlot& s = slot(v);
    return s.has_grad ? s.grad : TensorT::zeros_like(s.value);
  }

  std::size_t size() const { return slots_.size(); }

  Var conv2d(Var x, Var kernel, std::optional<Var> bias, int stride, int pad) {
    const TensorT* b = bias ? &value(*bias) : nullptr;
    TensorT out = ops::conv2d(value(x), value(kernel), b, stride, pad);
    const bool rg = needs(x) || needs(kernel) || (bias && needs(*bias));
    return push(std::move(out), rg, [=](BasicTape& t, const TensorT& g) {
      auto grads = ops::conv2d_backward(t.value(x), t.value(kernel), g, stride, pad, t.needs(x),
                                        t.needs(kernel) || (bias && t.needs(*bias)));
      if (t.needs(x)) t.accumulate(x, grads.input);
      if (t.needs(kernel)) t.accumulate(kernel, grads.kernel);
      if (bias && t.needs(*bias)) t.accumulate(*bias, grads.bias);
    });
  }

  Var leaky_relu(Var x, Scalar slope) {
    return push(ops::leaky_relu(value(x), slope), needs(x), [=](BasicTape& t, const TensorT& g) {
      t.accumulate(x, ops::leaky_relu_backward(t.value(x), slope, g));
    });
  }

  Var sigmoid(Var x) {
    TensorT y = ops::sigmoid(value(x));
    const std::size_t out_id = slots_.size();
    return push(std::move(y), needs(x), [=](BasicTape& t, const TensorT& g) {
      t.accumulate(x, ops::sigmoid_backward(t.slots_[out_id].value, g));
    });
  }

  Var affine(Var x, Scalar scale, Scalar shift) {
    return push(ops::affine(value(x), scale, shift), needs(x),
                [=](BasicTape& t, const TensorT& g) {
                  t.accumulate(x, ops::affine_backward(scale, g));
                });
  }

  Var add(Var a, Var b) {
    return push(ops::add(value(a), value(b)), needs(a) || needs(b),
                [=](BasicTape& t, const TensorT& g) {
                  if (t.needs(a)) t.accumulate(a, g);
                  if (t.needs(b)) t.accumulate(b, g);
                });
  }

  Var mul(Var a, Var b) {
    return push(ops::mul(value(a), value(b)), needs(a) || needs(b),
                [=](BasicTape& t, const TensorT& g) {
                  auto [ga, gb] = ops::mul_backward(t.value(a), t.value(b), g);
                  if (t.needs(a)) t.accumulate(a, ga);
                  if (t.needs(b)) t.accumulate(b, gb);
                });
  }

  Var clamp01(Var x) {
    return push(ops::clamp01(value(x)), needs(x), [=](BasicTape& t, const TensorT& g) {
      t.accumulate(x, ops::clamp01_backward(t.value(x), g));
    });
  }

  // Scalar output of shape [1]; argmax_of() reports the routed index.
  Var reduce_max(Var x) {
    const auto m = ops::reduce_max(value(x));
    TensorT out({1}, {m.value});
    const auto shape = value(x).shape();
    Var v = push(std::move(out), needs(x), [=](BasicTape& t, const TensorT& g) {
      t.accumulate(x, ops::reduce_max_backward<Scalar>(shape, m.index, g[0]));
    });
    argmax_.resize(slots_.size(), -1);
    argmax_[v.id] = m.index;
    return v;
  }

  Eigen::Index argmax_of(Var v) const {
    if (v.id >= argmax_.size() || argmax_[v.id] < 0) throw StateError("not a reduce_max entry");
    return argmax_[v.id];
  }

  // Seeds `output` with `seed` and propagates to every earlier entry.
  // Allowed once per recording; zero_grad() re-arms the tape.
  void backward(Var output, const TensorT& seed) {
    if (backward_done_) throw StateError("tape: backward already run; call zero_grad()");
    ops::require_same_shape(value(output), seed, "backward seed");
    ops::require_finite(seed, "backward seed");
    backward_done_ = true;
    accumulate(output, seed);
    for (std::size_t i = output.id + 1; i-- > 0;) {
      DualSlot& s = slots_[i];
      if (!s.has_grad || !s.requires_grad || !backward_fns_[i]) continue;
      backward_fns_[i](*this, s.grad);
    }
  }

  bool backward_done() const { return backward_done_; }

  void zero_grad() {
    for (auto& s : slots_) {
      s.has_grad = false;
      s.grad = TensorT();
    }
    backward_done_ = false;
  }

  bool needs(Var v) const { return slot(v).requires_grad; }

 private:
  using BackwardFn = std::function<void(BasicTape&, const TensorT&)>;

  DualSlot& slot(Var v) {
    if (!v.valid() || v.id >= slots_.size()) throw IndexError("tape: invalid variable");
    return slots_[v.id];
  }
  const DualSlot& slot(Var v) const {
    if (!v.valid() || v.id >= slots_.size()) throw IndexError("tape: invalid variable");
    return slots_[v.id];
  }

  Var push(TensorT value, bool requires_grad, BackwardFn fn) {
    slots_.push_back(DualSlot{std::move(value), TensorT(), requires_grad, false});
    backward_fns_.push_back(std::move(fn));
    return Var{slots_.size() - 1};
  }

  void accumulate(Var v, const TensorT& g) {
    DualSlot& s = slot(v);
    ops::require_same_shape(s.value, g, "gradient accumulate");
    if (!s.has_grad) {
      s.grad = g;
      s.has_grad = true;
    } else {
      s.grad.data() += g.data();
    }
  }

  std::vector<DualSlot> slots_;
  std::vector<BackwardFn> backward_fns_;
  std::vector<Eigen::Index> argmax_;
  bool backward_done_ = false;
};

using Tape = BasicTape<double>;

}  // namespace advlogo
