// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include <cmath>

#include "cttl/ops.hpp"
#include "cttl/reference.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cttl;
using cttl::testing::random_tensor;

TEST_CASE("tensor layout and bounds") {
  Tensor<double> t({2, 3, 4});
  CHECK(t.size() == 24);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 4; ++k) t.at(i, j, k) = double(100 * i + 10 * j + k);
  CHECK(t[0] == 0);
  CHECK(t[4 * 3 + 4 + 1] == 111);
  CHECK(t.at(1, 2, 3) == 123);
  CHECK_THROWS_AS(t.at(2, 0, 0), ShapeError);
  CHECK_THROWS_AS(t.at(0, 3, 0), ShapeError);
  CHECK_THROWS_AS(t.at(0, 0), ShapeError);
  CHECK_THROWS_AS(Tensor<double>(Shape{}), ShapeError);
  CHECK_THROWS_AS(Tensor<double>({2, 2}, std::vector<double>(3)), ShapeError);
  CHECK(Tensor<double>({0, 3}).size() == 0);
}

TEST_CASE("conv2d basics") {
  Rng rng(1);
  const auto k = random_tensor({3, 3, 2, 3}, rng);
  const auto y = conv2d(Tensor<double>({5, 6, 2}), k, PadMode::kZeroSame);
  CHECK(y.dims() == Shape{5, 6, 3});
  for (double v : y.data()) CHECK(v == 0.0);

  const auto x = random_tensor({4, 5, 1}, rng);
  CHECK(conv2d(x, Tensor<double>::ones({1, 1, 1, 1}), PadMode::kZeroSame) == x);
  CHECK(conv2d(x, Tensor<double>::ones({1, 1, 1, 1}), PadMode::kCircularSame) == x);

  CHECK_THROWS_AS(conv2d(x, Tensor<double>({2, 2, 1, 1}), PadMode::kZeroSame), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor<double>({3, 3, 2, 1}), PadMode::kZeroSame), ShapeError);
}

TEST_CASE("conv2d matches the scalar oracle") {
  Rng rng(2);
  for (PadMode mode : {PadMode::kZeroSame, PadMode::kCircularSame})
    for (std::size_t kk : {1, 3, 5, 7}) {
      const auto x = random_tensor({7, 7, 2}, rng), k = random_tensor({kk, kk, 2, 3}, rng);
      const auto ref = reference::conv2d(x, k, mode == PadMode::kCircularSame);
      CHECK(reference::max_abs_diff(conv2d(x, k, mode), ref) <= 1e-12);
    }
}

TEST_CASE("conv2d is linear in its input") {
  Rng rng(3);
  const auto x = random_tensor({6, 6, 3}, rng), y = random_tensor({6, 6, 3}, rng);
  const auto k = random_tensor({3, 3, 3, 2}, rng);
  const double a = 0.7, b = -1.3;
  const auto lhs = conv2d(add(scale(x, a), scale(y, b)), k, PadMode::kZeroSame);
  const auto rhs = add(scale(conv2d(x, k, PadMode::kZeroSame), a), scale(conv2d(y, k, PadMode::kZeroSame), b));
  CHECK(reference::max_abs_diff(lhs, rhs) <= 1e-10);
}

TEST_CASE("conv2d adjoints satisfy the inner-product identity") {
  Rng rng(4);
  for (PadMode mode : {PadMode::kZeroSame, PadMode::kCircularSame}) {
    const auto x = random_tensor({5, 7, 2}, rng), k = random_tensor({3, 5, 2, 3}, rng);
    const auto g = random_tensor({5, 7, 3}, rng);
    const double lhs = sum(mul(conv2d(x, k, mode), g));
    CHECK(std::abs(lhs - sum(mul(x, conv2d_grad_input(g, k, mode)))) <= 1e-10);
    CHECK(std::abs(lhs - sum(mul(k, conv2d_grad_kernel(x, g, 3, 5, mode)))) <= 1e-10);
  }
}

TEST_CASE("kernel composition") {
  Rng rng(5);
  SUBCASE("identity channel kernel is neutral") {
    const auto a = random_tensor({3, 3, 2, 4}, rng);
    Tensor<double> id({1, 1, 2, 2});
    id.at(0, 0, 0, 0) = id.at(0, 0, 1, 1) = 1.0;
    CHECK(compose_kernels(a, id) == a);
  }
  SUBCASE("two 5x5 kernels compose to 9x9") {
    const auto c = compose_kernels(random_tensor({5, 5, 2, 3}, rng), random_tensor({5, 5, 4, 2}, rng));
    CHECK(c.dims() == Shape{9, 9, 4, 3});
  }
  SUBCASE("exact under circular padding for every odd size up to 7") {
    for (std::size_t ka : {1, 3, 5, 7})
      for (std::size_t kb : {1, 3, 5, 7}) {
        const std::size_t h = 4 + rng.below(9), w = 4 + rng.below(9);
        const auto x = random_tensor({h, w, 2}, rng);
        const auto a = random_tensor({ka, ka, 3, 2}, rng), b = random_tensor({kb, kb, 2, 3}, rng);
        const auto seq = conv2d(conv2d(x, b, PadMode::kCircularSame), a, PadMode::kCircularSame);
        CHECK(reference::max_abs_diff(seq, conv2d(x, compose_kernels(a, b), PadMode::kCircularSame)) <= 1e-10);
      }
  }
  SUBCASE("interior agreement under zero padding") {
    const std::size_t ka = 3, kb = 5, margin = (ka + kb - 2) / 2;
    const auto x = random_tensor({12, 12, 2}, rng);
    const auto a = random_tensor({ka, ka, 2, 2}, rng), b = random_tensor({kb, kb, 2, 2}, rng);
    const auto seq = conv2d(conv2d(x, b, PadMode::kZeroSame), a, PadMode::kZeroSame);
    const auto once = conv2d(x, compose_kernels(a, b), PadMode::kZeroSame);
    double worst = 0, border = 0;
    for (std::size_t y = 0; y < 12; ++y)
      for (std::size_t xx = 0; xx < 12; ++xx)
        for (std::size_t c = 0; c < 2; ++c) {
          const double d = std::abs(seq.at(y, xx, c) - once.at(y, xx, c));
          const bool inside = y >= margin && y < 12 - margin && xx >= margin && xx < 12 - margin;
          (inside ? worst : border) = std::max(inside ? worst : border, d);
        }
    CHECK(worst <= 1e-10);
    CHECK(border > 1e-6);
  }
  SUBCASE("composition is flip-sensitive") {
    const auto x = random_tensor({8, 8, 1}, rng);
    const auto a = random_tensor({3, 3, 1, 1}, rng), b = random_tensor({3, 3, 1, 1}, rng);
    const auto wrong = conv2d(x, compose_kernels(flip_kernel(a), b), PadMode::kCircularSame);
    const auto seq = conv2d(conv2d(x, b, PadMode::kCircularSame), a, PadMode::kCircularSame);
    CHECK(reference::max_abs_diff(wrong, seq) > 1e-3);
  }
}

TEST_CASE("channel concat and slice") {
  Rng rng(6);
  const auto a = random_tensor({3, 4, 2}, rng), b = random_tensor({3, 4, 3}, rng);
  const std::vector<Tensor<double>> one{a};
  CHECK(concat_channels(std::span<const Tensor<double>>(one)) == a);
  const std::vector<Tensor<double>> parts{a, b};
  const auto c = concat_channels(std::span<const Tensor<double>>(parts));
  CHECK(c.dims() == Shape{3, 4, 5});
  CHECK(slice_channels(c, 0, 2) == a);
  CHECK(slice_channels(c, 2, 3) == b);
  const std::vector<Tensor<double>> window(3, Tensor<double>({2, 2, 48}));
  CHECK(concat_channels(std::span<const Tensor<double>>(window)).dim(2) == 144);
  CHECK_THROWS_AS(slice_channels(c, 4, 2), ShapeError);
  const std::vector<Tensor<double>> bad{a, Tensor<double>({2, 4, 1})};
  CHECK_THROWS_AS(concat_channels(std::span<const Tensor<double>>(bad)), ShapeError);
}

TEST_CASE("xavier initialization") {
  const auto t = xavier_init<double>({3, 3}, 3, 3, 9);
  for (double v : t.data()) CHECK(std::abs(v) <= 1.0);
  CHECK(xavier_init<double>({3, 3}, 3, 3, 9) == t);
  CHECK_FALSE(xavier_init<double>({3, 3}, 3, 3, 10) == t);

  const auto big = xavier_init<double>({100000}, 300, 300, 1);
  const double bound = std::sqrt(6.0 / 600.0);
  double mean = 0, var = 0;
  for (double v : big.data()) mean += v;
  mean /= double(big.size());
  for (double v : big.data()) var += (v - mean) * (v - mean);
  var /= double(big.size());
  CHECK(std::abs(var - bound * bound / 3) <= 0.05 * bound * bound / 3);
}

TEST_CASE("elementwise suite") {
  const Tensor<double> zero({1});
  CHECK(sigmoid(zero)[0] == 0.5);
  CHECK(tanh(zero)[0] == 0.0);
  CHECK(sigmoid(Tensor<double>({1}, 3.0))[0] == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))).epsilon(1e-15));
  CHECK(sigmoid(Tensor<double>({1}, -800.0))[0] >= 0.0);
  CHECK(sigmoid(Tensor<double>({1}, 800.0))[0] == 1.0);
  Rng rng(7);
  const auto x = random_tensor({3, 3}, rng);
  CHECK(mul(x, Tensor<double>::ones({3, 3})) == x);
  CHECK(sub(x, x) == Tensor<double>({3, 3}));
  CHECK_THROWS_AS(add(x, Tensor<double>({3, 2})), ShapeError);
  const auto c = clamp(x, -0.5, 0.5);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(c[i] == std::clamp(x[i], -0.5, 0.5));
  const auto b = add_channel_bias(Tensor<double>({2, 2, 3}), Tensor<double>({3}, std::vector<double>{1, 2, 3}));
  CHECK(b.at(1, 1, 2) == 3.0);
  CHECK(channel_sum(b)[1] == 8.0);
}

TEST_CASE("FLOP meter counts multiply-accumulates as two") {
  Rng rng(8);
  const auto x = random_tensor({8, 8, 1}, rng), k = random_tensor({3, 3, 1, 1}, rng);
  flops::Scope s;
  conv2d(x, k, PadMode::kZeroSame);
  CHECK(s.count() == 1152);
  flops::Scope e;
  add(x, x);
  CHECK(e.count() == 64);
}
