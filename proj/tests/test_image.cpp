#include <doctest.h>

#include <filesystem>

#include "advlogo/errors.hpp"
#include "advlogo/image.hpp"
#include "advlogo/parallel.hpp"
#include "advlogo/random.hpp"
#include "support.hpp"

using namespace advlogo;

TEST_SUITE("image") {

TEST_CASE("tensor layout round-trip") {
  Rng rng(71);
  const Image img = test::random_image(5, 3, rng);
  const Tensor t = to_tensor(img);
  CHECK(t.shape() == Tensor::Shape{3, 3, 5});
  CHECK(t.at(1, 2, 4) == img.rgb(img.index(4, 2), 1));
  CHECK((from_tensor(t).rgb == img.rgb).all());
  CHECK_THROWS_AS(from_tensor(Tensor::zeros({2, 3, 3})), DimensionError);
}

TEST_CASE("PNG round-trip is exact on 8-bit values") {
  Rng rng(72);
  Image img(7, 4);
  for (Eigen::Index i = 0; i < img.rgb.size(); ++i) img.rgb.data()[i] = static_cast<double>(rng.integer(0, 255)) / 255.0;
  const auto path = (std::filesystem::temp_directory_path() / "advlogo_img.png").string();
  write_png(path, img);
  const Image back = read_png(path);
  CHECK(back.width == 7);
  CHECK(((back.rgb - img.rgb).abs() < 1e-12).all());
  CHECK(encode_png(img) == encode_png(back));

  Mask m(28);
  for (int i = 0; i < 28; ++i) m[i] = rng.uniform() < 0.5;
  write_mask_png(path, m, 7, 4);
  int w = 0, h = 0;
  CHECK((read_mask_png(path, &w, &h) == m).all());
  CHECK(w == 7);
  CHECK(h == 4);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_png(path), IoError);
}

TEST_CASE("centre crop and resize") {
  Image img(8, 4);
  img.rgb.setConstant(0.25);
  const Image out = center_crop_resize(img, 16);
  CHECK(out.width == 16);
  CHECK(out.height == 16);
  CHECK(((out.rgb - 0.25).abs() < 1e-12).all());
}

TEST_CASE("seed splitting and parallel_for") {
  CHECK(derive_seed(1, Stream::kAugment, 0) != derive_seed(1, Stream::kAugment, 1));
  CHECK(derive_seed(1, Stream::kAugment, 0) != derive_seed(1, Stream::kBackgrounds, 0));
  Rng a(5, Stream::kTest, 3), b(5, Stream::kTest, 3);
  for (int i = 0; i < 10; ++i) CHECK(a.next() == b.next());
  Rng u(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK((x >= 0 && x < 1));
    const auto k = u.integer(-2, 3);
    CHECK((k >= -2 && k <= 3));
  }
  std::vector<int> out(100);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw DomainError("x"); }), DomainError);
}

}  // TEST_SUITE
