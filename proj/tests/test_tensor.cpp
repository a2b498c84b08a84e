#include <doctest.h>

#include "advlogo/errors.hpp"
#include "advlogo/tape.hpp"
#include "advlogo/tensor.hpp"
#include "support.hpp"

using namespace advlogo;
using advlogo::test::close_rel;
using advlogo::test::random_tensor;

namespace {

// Direct nested-loop convolution.
Tensor naive_conv(const Tensor& x, const Tensor& k, const Tensor* b, int stride, int pad) {
  const auto C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const auto K = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const auto oh = (H + 2 * pad - kh) / stride + 1, ow = (W + 2 * pad - kw) / stride + 1;
  Tensor out({K, oh, ow});
  for (Eigen::Index f = 0; f < K; ++f)
    for (Eigen::Index oy = 0; oy < oh; ++oy)
      for (Eigen::Index ox = 0; ox < ow; ++ox) {
        double s = b ? (*b)[f] : 0.0;
        for (Eigen::Index c = 0; c < C; ++c)
          for (Eigen::Index ky = 0; ky < kh; ++ky)
            for (Eigen::Index kx = 0; kx < kw; ++kx) {
              const auto y = oy * stride + ky - pad, xx = ox * stride + kx - pad;
              if (y < 0 || y >= H || xx < 0 || xx >= W) continue;
              s += x.at(c, y, xx) * k[((f * C + c) * kh + ky) * kw + kx];
            }
        out.at(f, oy, ox) = s;
      }
  return out;
}

// Central-difference gradient of sum(w * f(x)) with respect to x.
Tensor fd_gradient(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, const Tensor& w,
                   double eps = 1e-3) {
  Tensor g = Tensor::zeros_like(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    g[i] = ((f(xp).data() * w.data()).sum() - (f(xm).data() * w.data()).sum()) / (2 * eps);
  }
  return g;
}

void check_close(const Tensor& a, const Tensor& b, double rel = 1e-3) {
  REQUIRE(a.same_shape(b));
  for (Eigen::Index i = 0; i < a.size(); ++i) CHECK(close_rel(a[i], b[i], rel, 1e-7));
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("conv2d of zero input is the bias") {
  Rng rng(1);
  const Tensor x = Tensor::zeros({1, 3, 3});
  const Tensor k = random_tensor({2, 1, 3, 3}, rng);
  const Tensor b({2}, {0.25, -1.5});
  const Tensor y = ops::conv2d(x, k, &b, 1, 0);
  CHECK(y.shape() == Tensor::Shape{2, 1, 1});
  CHECK(y[0] == 0.25);
  CHECK(y[1] == -1.5);
  CHECK(ops::conv2d(x, k, 1, 0).data().isZero());
}

TEST_CASE("identity kernel reproduces the input") {
  Rng rng(2);
  const Tensor x = random_tensor({1, 5, 4}, rng);
  Tensor k = Tensor::zeros({1, 1, 3, 3});
  k[4] = 1.0;
  const Tensor y = ops::conv2d(x, k, 1, 1);
  CHECK(y.shape() == x.shape());
  CHECK((y.data() == x.data()).all());
}

TEST_CASE("conv2d matches nested-loop oracle") {
  Rng rng(3);
  const Tensor x = random_tensor({1, 4, 4}, rng);
  const Tensor k = random_tensor({1, 1, 2, 2}, rng);
  check_close(ops::conv2d(x, k, 1, 0), naive_conv(x, k, nullptr, 1, 0), 1e-12);

  const Tensor x3 = random_tensor({3, 9, 7}, rng);
  const Tensor k3 = random_tensor({4, 3, 3, 3}, rng);
  const Tensor b3 = random_tensor({4}, rng);
  check_close(ops::conv2d(x3, k3, &b3, 2, 1), naive_conv(x3, k3, &b3, 2, 1), 1e-12);
}

TEST_CASE("conv2d shape errors") {
  CHECK_THROWS_AS(ops::conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), 1, 1), DimensionError);
  CHECK_THROWS_AS(ops::conv2d(Tensor::zeros({4, 4}), Tensor::zeros({1, 1, 3, 3}), 1, 1), DimensionError);
  CHECK_THROWS_AS(ops::conv2d(Tensor::zeros({1, 4, 4}), Tensor::zeros({1, 1, 3, 3}), 0, 1), DomainError);
  const Tensor bad_bias({3}, {0, 0, 0});
  CHECK_THROWS_AS(ops::conv2d(Tensor::zeros({1, 4, 4}), Tensor::zeros({2, 1, 3, 3}), &bad_bias, 1, 1),
                  DimensionError);
}

TEST_CASE("conv2d backward matches finite differences") {
  Rng rng(4);
  const Tensor x = random_tensor({2, 6, 5}, rng);
  const Tensor k = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor y = ops::conv2d(x, k, &b, 2, 1);
  const Tensor w = random_tensor(y.shape(), rng);
  const auto grads = ops::conv2d_backward(x, k, w, 2, 1, true, true);
  check_close(grads.input, fd_gradient([&](const Tensor& v) { return ops::conv2d(v, k, &b, 2, 1); }, x, w));
  check_close(grads.kernel, fd_gradient([&](const Tensor& v) { return ops::conv2d(x, v, &b, 2, 1); }, k, w));
  check_close(grads.bias, fd_gradient([&](const Tensor& v) { return ops::conv2d(x, k, &v, 2, 1); }, b, w));
}

TEST_CASE("leaky_relu values and gradient") {
  const Tensor x({2}, {-2.0, 3.0});
  const Tensor y = ops::leaky_relu(x, 0.1);
  CHECK(y[0] == doctest::Approx(-0.2));
  CHECK(y[1] == 3.0);
  CHECK(ops::leaky_relu(Tensor::zeros({1}), 0.1)[0] == 0.0);
  const Tensor g = ops::leaky_relu_backward(x, 0.1, Tensor::constant({2}, 1.0));
  const double fd = (ops::leaky_relu(Tensor({1}, {-2.0 + 1e-4}), 0.1)[0] -
                     ops::leaky_relu(Tensor({1}, {-2.0 - 1e-4}), 0.1)[0]) / 2e-4;
  CHECK(g[0] == doctest::Approx(0.1));
  CHECK(g[0] == doctest::Approx(fd).epsilon(1e-9));
  CHECK(g[1] == 1.0);
  CHECK_THROWS_AS(ops::leaky_relu(x, 1.0), DomainError);
}

TEST_CASE("sigmoid values and gradient") {
  CHECK(ops::sigmoid(Tensor::zeros({1}))[0] == 0.5);
  const Tensor xs({5}, {0.0, 1.0, 5.0, 20.0, 50.0});
  const Tensor ys = ops::sigmoid(xs);
  for (Eigen::Index i = 1; i < ys.size(); ++i) CHECK(ys[i] >= ys[i - 1]);
  CHECK(ys[4] == doctest::Approx(1.0));
  const Tensor g = ops::sigmoid_backward(ops::sigmoid(Tensor::zeros({1})), Tensor::constant({1}, 1.0));
  const double fd = (ops::sigmoid(Tensor({1}, {1e-3}))[0] - ops::sigmoid(Tensor({1}, {-1e-3}))[0]) / 2e-3;
  CHECK(g[0] == 0.25);
  CHECK(close_rel(g[0], fd, 1e-6));
}

TEST_CASE("reduce_max values, ties and backward") {
  const auto m = ops::reduce_max(Tensor({2}, {0.3, 0.9}));
  CHECK(m.value == 0.9);
  CHECK(m.index == 1);
  const auto tie = ops::reduce_max(Tensor({2}, {0.5, 0.5}));
  CHECK(tie.value == 0.5);
  CHECK(tie.index == 0);
  const Tensor g = ops::reduce_max_backward<double>({2}, m.index, 1.0);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  CHECK_THROWS_AS(ops::reduce_max(Tensor::zeros({0})), DomainError);
}

TEST_CASE("elementwise ops") {
  Rng rng(5);
  const Tensor x = random_tensor({2, 2}, rng);
  CHECK((ops::affine(x, 1.0, 0.0).data() == x.data()).all());
  const Tensor c = ops::clamp01(Tensor({1}, {1.3}));
  CHECK(c[0] == 1.0);
  CHECK(ops::clamp01_backward(Tensor({1}, {1.3}), Tensor::constant({1}, 1.0))[0] == 0.0);
  CHECK(ops::clamp01_backward(Tensor({1}, {0.4}), Tensor::constant({1}, 1.0))[0] == 1.0);

  const Tensor a = random_tensor({2, 2}, rng), b = random_tensor({2, 2}, rng);
  const Tensor w = random_tensor({2, 2}, rng);
  const auto [ga, gb] = ops::mul_backward(a, b, w);
  check_close(ga, fd_gradient([&](const Tensor& v) { return ops::mul(v, b); }, a, w));
  check_close(gb, fd_gradient([&](const Tensor& v) { return ops::mul(a, v); }, b, w));
  check_close(ops::affine_backward(2.5, w), fd_gradient([&](const Tensor& v) { return ops::affine(v, 2.5, 1.0); }, a, w));
  CHECK_THROWS_AS(ops::add(a, Tensor::zeros({3})), DimensionError);
  CHECK_THROWS_AS(ops::mul(a, Tensor::zeros({4})), DimensionError);
}

TEST_CASE("clamp01 gradient away from kinks matches finite differences") {
  Rng rng(6);
  Tensor x = random_tensor({40}, rng, -0.5, 1.5);
  const Tensor w = random_tensor({40}, rng);
  const Tensor fd = fd_gradient([](const Tensor& v) { return ops::clamp01(v); }, x, w);
  const Tensor g = ops::clamp01_backward(x, w);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) < 2e-3 || std::abs(x[i] - 1) < 2e-3) continue;
    CHECK(close_rel(g[i], fd[i], 1e-3, 1e-9));
  }
}

TEST_CASE("ops are bit-deterministic") {
  Rng rng(7);
  const Tensor x = random_tensor({3, 8, 8}, rng);
  const Tensor k = random_tensor({4, 3, 3, 3}, rng);
  const Tensor y1 = ops::conv2d(x, k, 2, 1), y2 = ops::conv2d(x, k, 2, 1);
  CHECK((y1.data() == y2.data()).all());
}

TEST_CASE("float instantiation") {
  TensorF x({1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
  TensorF k({1, 1, 1, 1}, {2.f});
  CHECK(ops::conv2d(x, k, 1, 0)[3] == 8.f);
}

}  // TEST_SUITE

TEST_SUITE("tape") {

TEST_CASE("reusing a variable sums path gradients") {
  Tape t;
  const auto x = t.input(Tensor({2}, {1.5, -2.0}));
  const auto y = t.mul(x, x);
  const auto z = t.add(y, x);
  t.backward(z, Tensor::constant({2}, 1.0));
  const Tensor g = t.grad(x);
  CHECK(g[0] == doctest::Approx(2 * 1.5 + 1));
  CHECK(g[1] == doctest::Approx(2 * -2.0 + 1));
}

TEST_CASE("conv chain gradient matches finite differences") {
  Rng rng(8);
  const Tensor x0 = random_tensor({2, 8, 8}, rng, 0, 1);
  const Tensor k = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor w = random_tensor({1}, rng);
  auto run = [&](const Tensor& xv, Tape* keep) {
    Tape local;
    Tape& t = keep ? *keep : local;
    const auto x = t.input(xv);
    const auto kv = t.input(k);
    const auto bv = t.input(b);
    const auto h = t.leaky_relu(t.conv2d(x, kv, bv, 2, 1), 0.1);
    const auto s = t.sigmoid(t.affine(h, 0.7, 0.1));
    const auto m = t.reduce_max(s);
    return std::pair{t.value(m)[0], std::array{x, kv, bv, m}};
  };
  Tape tape;
  const auto [value, vars] = run(x0, &tape);
  (void)value;
  tape.backward(vars[3], w);
  const Tensor g = tape.grad(vars[0]);
  int checked = 0, ok = 0;
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Tensor xp = x0, xm = x0;
    xp[i] += 1e-3;
    xm[i] -= 1e-3;
    const double fd = w[0] * (run(xp, nullptr).first - run(xm, nullptr).first) / 2e-3;
    ++checked;
    ok += close_rel(g[i], fd, 1e-3, 1e-8);
  }
  CHECK(ok >= checked * 98 / 100);
}

TEST_CASE("backward runs once until zero_grad") {
  Tape t;
  const auto x = t.input(Tensor({1}, {2.0}));
  const auto y = t.affine(x, 3.0, 0.0);
  t.backward(y, Tensor::constant({1}, 1.0));
  CHECK(t.backward_done());
  CHECK_THROWS_AS(t.backward(y, Tensor::constant({1}, 1.0)), StateError);
  t.zero_grad();
  CHECK(t.grad(x)[0] == 0.0);
  t.backward(y, Tensor::constant({1}, 2.0));
  CHECK(t.grad(x)[0] == 6.0);
}

TEST_CASE("constants receive no gradient and argmax is reported") {
  Tape t;
  const auto c = t.input(Tensor({3}, {0.2, 0.7, 0.1}), false);
  const auto m = t.reduce_max(c);
  CHECK(t.argmax_of(m) == 1);
  CHECK_FALSE(t.needs(m));
  CHECK_THROWS_AS(t.argmax_of(c), StateError);
  CHECK_THROWS_AS(t.value(Tape::Var{}), IndexError);
  CHECK_THROWS_AS(t.input(Tensor({1}, {std::nan("")})), NumericError);
}

}  // TEST_SUITE
