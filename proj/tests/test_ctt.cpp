// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/analysis.hpp"
#include "cttl/ctt.hpp"
#include "cttl/reference.hpp"
#include "cttl/verify.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cttl;
using cttl::testing::random_tensor;

namespace {

std::vector<Tensor<double>> random_states(const CttShape& s, std::size_t h, std::size_t w, Rng& rng) {
  std::vector<Tensor<double>> out;
  for (std::size_t i = 1; i <= s.order(); ++i) out.push_back(random_tensor({h, w, s.ranks[i]}, rng));
  return out;
}

}  // namespace

TEST_CASE("factor chain validation") {
  const std::vector<Tensor<double>> ok{Tensor<double>({3, 3, 4, 8}), Tensor<double>({3, 3, 2, 4})};
  const CttShape s = ctt_shape(std::span<const Tensor<double>>(ok));
  CHECK(s.kernel == 3);
  CHECK(s.ranks == std::vector<std::size_t>{8, 4, 2});
  CHECK(s.parameter_count() == 9 * 4 * 8 + 9 * 2 * 4);

  const std::vector<Tensor<double>> broken{Tensor<double>({3, 3, 4, 8}), Tensor<double>({3, 3, 2, 5})};
  CHECK_THROWS_AS(ctt_shape(std::span<const Tensor<double>>(broken)), ShapeError);
  const std::vector<Tensor<double>> mixed{Tensor<double>({3, 3, 4, 8}), Tensor<double>({5, 5, 2, 4})};
  CHECK_THROWS_AS(ctt_shape(std::span<const Tensor<double>>(mixed)), ShapeError);
  const std::vector<Tensor<double>> even{Tensor<double>({4, 4, 4, 8})};
  CHECK_THROWS_AS(ctt_shape(std::span<const Tensor<double>>(even)), ShapeError);
}

TEST_CASE("parameter count is linear in the order") {
  for (std::size_t n = 1; n <= 6; ++n) {
    const CttShape s{5, std::vector<std::size_t>(n + 1, 8)};
    CHECK(s.parameter_count() == n * 25 * 64);
  }
}

TEST_CASE("reconstruct_kernel") {
  Rng rng(1);
  const auto f = CttFactors<double>::random({5, {6, 4, 3, 2}}, rng.next_u64());
  CHECK(reconstruct_kernel(f, 1) == f.factors[0]);
  for (std::size_t i = 1; i <= 3; ++i) {
    const auto k = reconstruct_kernel(f, i);
    CHECK(k.dim(0) == i * 4 + 1);
    CHECK(k.dims() == Shape{i * 4 + 1, i * 4 + 1, f.shape().ranks[i], 6});
  }
  CHECK(reconstruct_kernel(f, 3).dim(0) == 13);
  const auto small = CttFactors<double>::random({3, {3, 2, 2, 3}}, rng.next_u64());
  CHECK(reference::max_abs_diff(reconstruct_kernel(small, 3), reference::composed_kernel(small.factors, 3)) <= 1e-10);
  CHECK_THROWS(reconstruct_kernel(f, 0));
  CHECK_THROWS(reconstruct_kernel(f, 4));
}

TEST_CASE("naive and linear evaluation") {
  Rng rng(2);
  SUBCASE("order one is a single convolution") {
    const auto f = CttFactors<double>::random({3, {4, 3}}, rng.next_u64());
    const auto st = random_states(f.shape(), 6, 6, rng);
    const auto sp = std::span<const Tensor<double>>(st);
    const auto direct = conv2d(st[0], f.factors[0], PadMode::kZeroSame);
    CHECK(ctt_naive(sp, f, PadMode::kZeroSame) == direct);
    CHECK(ctt_linear(sp, f, PadMode::kZeroSame) == direct);
  }
  SUBCASE("zero states give zero output") {
    const auto f = CttFactors<double>::random({3, {4, 3, 2}}, rng.next_u64());
    const std::vector<Tensor<double>> st{Tensor<double>({5, 5, 3}), Tensor<double>({5, 5, 2})};
    const auto out = ctt_linear(std::span<const Tensor<double>>(st), f, PadMode::kZeroSame);
    CHECK(out == Tensor<double>(out.dims()));
  }
  SUBCASE("agree under circular padding") {
    for (std::size_t n : {3, 5}) {
      const auto f = CttFactors<double>::random({3, std::vector<std::size_t>(n + 1, 4)}, rng.next_u64());
      const auto st = random_states(f.shape(), 8, 8, rng);
      const auto sp = std::span<const Tensor<double>>(st);
      CHECK(reference::max_abs_diff(ctt_naive(sp, f, PadMode::kCircularSame),
                                    ctt_linear(sp, f, PadMode::kCircularSame)) <= 1e-10);
    }
  }
  SUBCASE("matches the direct composition oracle") {
    const auto f = CttFactors<double>::random({3, {3, 2, 3}}, rng.next_u64());
    const auto st = random_states(f.shape(), 6, 7, rng);
    CHECK(reference::max_abs_diff(ctt_linear(std::span<const Tensor<double>>(st), f, PadMode::kCircularSame),
                                  reference::ctt(st, f.factors, true)) <= 1e-10);
  }
  SUBCASE("superposition in each input") {
    const auto f = CttFactors<double>::random({3, {4, 3, 3, 3}}, rng.next_u64());
    auto a = random_states(f.shape(), 6, 6, rng), b = a;
    b[1] = random_tensor({6, 6, 3}, rng);
    auto ab = a;
    ab[1] = add(a[1], b[1]);
    auto zero1 = a;
    zero1[1] = Tensor<double>({6, 6, 3});
    auto eval = [&](const std::vector<Tensor<double>>& s) {
      return ctt_linear(std::span<const Tensor<double>>(s), f, PadMode::kZeroSame);
    };
    auto only_b = zero1;
    for (auto& s : only_b) s = Tensor<double>(s.dims());
    only_b[1] = b[1];
    CHECK(reference::max_abs_diff(eval(ab), add(eval(a), eval(only_b))) <= 1e-10);
  }
  SUBCASE("float agrees to single precision") {
    const auto f = CttFactors<float>::random({5, {8, 8, 8, 8}}, rng.next_u64());
    std::vector<Tensor<float>> st;
    for (int i = 0; i < 3; ++i) st.push_back(random_tensor<float>({12, 12, 8}, rng));
    const auto sp = std::span<const Tensor<float>>(st);
    const auto n = ctt_naive(sp, f, PadMode::kCircularSame).cast<double>();
    const auto l = ctt_linear(sp, f, PadMode::kCircularSame).cast<double>();
    double scale = 0;
    for (double v : n.data()) scale = std::max(scale, std::abs(v));
    CHECK(reference::max_abs_diff(n, l) / scale <= 1e-4);
  }
  SUBCASE("mutated factors break equivalence") {
    const auto r = ctt_equivalence_sweep({2}, {4}, {3}, 1, 10, 3, Mutation::kTransposeKernel);
    CHECK(r.circular_double > 1e-3);
    const auto clean = ctt_equivalence_sweep({2}, {4}, {3}, 1, 10, 3);
    CHECK(clean.circular_double <= 1e-10);
  }
}

TEST_CASE("zero padding agrees on the interior only") {
  const auto r = ctt_equivalence_sweep({2, 3}, {4}, {3, 5}, 2, 12, 9);
  CHECK(r.interior_double <= 1e-10);
  Rng rng(3);
  const auto f = CttFactors<double>::random({5, {4, 4, 4, 4}}, rng.next_u64());
  const auto st = random_states(f.shape(), 16, 16, rng);
  const auto sp = std::span<const Tensor<double>>(st);
  CHECK(reference::max_abs_diff(ctt_naive(sp, f, PadMode::kZeroSame), ctt_linear(sp, f, PadMode::kZeroSame)) > 1e-6);
}

TEST_CASE("measured FLOPs follow the closed forms") {
  Rng rng(4);
  for (std::size_t n = 1; n <= 5; ++n) {
    const CttShape s{3, std::vector<std::size_t>(n + 1, 4)};
    const auto f = CttFactors<double>::random(s, rng.next_u64());
    std::vector<Var<double>> st, fv;
    for (const auto& t : random_states(s, 9, 7, rng)) st.push_back(Var<double>::constant(t));
    for (const auto& g : f.factors) fv.push_back(Var<double>::constant(g));
    const auto ss = std::span<const Var<double>>(st), fs = std::span<const Var<double>>(fv);
    flops::Scope lin;
    ctt_linear(ss, fs, PadMode::kZeroSame);
    CHECK(lin.count() == ctt_flops(s, 9, 7, CttAlgorithm::kLinear));
    CHECK(lin.count() == n * 2 * 9 * 16 * 63 + (n - 1) * 4 * 63);
    flops::Scope naive;
    ctt_naive(ss, fs, PadMode::kZeroSame);
    CHECK(naive.count() == ctt_flops(s, 9, 7, CttAlgorithm::kNaive));
  }
}

TEST_CASE("ctt_linear gradients with respect to factors and inputs") {
  Rng rng(5);
  const auto f = CttFactors<double>::random({3, {4, 2, 3, 2}}, rng.next_u64());
  std::vector<Var<double>> factors, states, all;
  for (const auto& g : f.factors) factors.push_back(Var<double>::parameter(g));
  for (const auto& t : random_states(f.shape(), 5, 4, rng)) states.push_back(Var<double>::parameter(t));
  all = factors;
  all.insert(all.end(), states.begin(), states.end());
  const auto w = Var<double>::constant(random_tensor({5, 4, 4}, rng));
  for (CttAlgorithm alg : {CttAlgorithm::kLinear, CttAlgorithm::kNaive})
    CHECK(gradient_check(
              [&] {
                return sum(mul(ctt_apply(std::span<const Var<double>>(states),
                                         std::span<const Var<double>>(factors), PadMode::kZeroSame, alg),
                               w));
              },
              all) < 1e-4);
}

TEST_CASE("tensor-train kernel format") {
  SUBCASE("balanced factorization") {
    CHECK(balanced_factorization(32, 2) == std::vector<std::size_t>{8, 4});
    CHECK(balanced_factorization(128, 2) == std::vector<std::size_t>{16, 8});
    CHECK(balanced_factorization(7, 2) == std::vector<std::size_t>{7, 1});
    CHECK(balanced_factorization(36, 3) == std::vector<std::size_t>{4, 3, 3});
    CHECK_THROWS_AS(balanced_factorization(0, 2), ConfigError);
  }
  SUBCASE("all-ones rank-one factors") {
    TtShape s{3, {2, 2}, {3, 1}, {1, 1}};
    TtCompressedKernel<double> k{s, {}};
    for (const auto& d : s.factor_shapes()) k.factors.push_back(Tensor<double>::ones(d));
    const auto w = tt_reconstruct_w(k);
    CHECK(w.dims() == Shape{3, 3, 3, 4});
    for (double v : w.data()) CHECK(v == 1.0);
  }
  SUBCASE("shape of the searched configuration") {
    TtShape s{5, {4, 8}, {4, 8}, {8, 8}};
    const auto w = tt_reconstruct_w(TtCompressedKernel<double>::random(s, 1));
    CHECK(w.dims() == Shape{5, 5, 32, 32});
    std::size_t total = 0;
    for (const auto& d : s.factor_shapes()) total += shape_size(d);
    CHECK(s.parameter_count() == total);
  }
  SUBCASE("brute-force contraction oracle") {
    TtShape s{3, {2, 3}, {3, 2}, {2, 3}};
    const auto k = TtCompressedKernel<double>::random(s, 2);
    CHECK(reference::max_abs_diff(tt_reconstruct_w(k), reference::tt_contract(k.factors, s.out_factors, s.in_factors)) <=
          1e-10);
    TtShape s3{3, {2, 2, 2}, {1, 2, 3}, {2, 2, 2}};
    const auto k3 = TtCompressedKernel<double>::random(s3, 3);
    CHECK(reference::max_abs_diff(tt_reconstruct_w(k3),
                                  reference::tt_contract(k3.factors, s3.out_factors, s3.in_factors)) <= 1e-10);
  }
  SUBCASE("inconsistent shapes") {
    CHECK_THROWS_AS((TtShape{3, {2, 2}, {2}, {1, 1}}.validate()), ShapeError);
    CHECK_THROWS_AS((TtShape{3, {2, 0}, {2, 2}, {1, 1}}.validate()), ShapeError);
  }
  SUBCASE("reconstruction gradients") {
    TtShape s{3, {2, 2}, {1, 3}, {2, 2}};
    const auto k = TtCompressedKernel<double>::random(s, 4);
    std::vector<Var<double>> f;
    for (const auto& t : k.factors) f.push_back(Var<double>::parameter(t));
    Rng rng(6);
    const auto w = Var<double>::constant(random_tensor({3, 3, 3, 4}, rng));
    CHECK(gradient_check([&] { return sum(mul(tt_reconstruct_w(s, std::span<const Var<double>>(f)), w)); }, f) <
          1e-4);
  }
}
