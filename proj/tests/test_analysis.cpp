// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include <cmath>
#include <limits>

#include "cttl/analysis.hpp"
#include "cttl/ops.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cttl;
using cttl::testing::random_tensor;

TEST_CASE("mse and psnr") {
  const Tensor<double> a({2, 2}, std::vector<double>{0, 0.5, 1, 0.25});
  const Tensor<double> b({2, 2}, std::vector<double>{0.1, 0.5, 0.9, 0.25});
  CHECK(mse(a, b) == doctest::Approx(0.005));
  CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(1 / 0.005)));
  CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());
  CHECK(psnr_from_mse(0.01) == doctest::Approx(20.0));
  CHECK_THROWS_AS(mse(a, Tensor<double>({4})), ShapeError);

  Rng rng(1);
  const auto x = random_tensor({16, 16}, rng, 0.0, 1.0), noise = random_tensor({16, 16}, rng);
  double last = std::numeric_limits<double>::infinity();
  for (double s : {0.01, 0.03, 0.1, 0.3}) {
    const double p = psnr(x, add(x, scale(noise, s)));
    CHECK(p < last);
    last = p;
  }
}

TEST_CASE("ssim properties") {
  const auto g = gaussian_window(SsimConfig{});
  CHECK(g.size() == 11);
  double total = 0;
  for (double v : g) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  for (std::size_t i = 0; i < 5; ++i) CHECK(g[i] == doctest::Approx(g[10 - i]));
  CHECK(g[5] > g[4]);

  Rng rng(2);
  const auto x = random_tensor({20, 20}, rng, 0.0, 1.0), y = random_tensor({20, 20}, rng, 0.0, 1.0);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(x, y) == doctest::Approx(ssim(y, x)).epsilon(1e-12));
  CHECK(ssim(x, y) < 0.5);
  CHECK(ssim(x, sub(Tensor<double>::ones({20, 20}), x)) < 0);
  const auto noisy = clamp(add(x, scale(random_tensor({20, 20}, rng), 0.05)), 0.0, 1.0);
  CHECK(ssim(x, noisy) > ssim(x, y));
  Tensor<double> c3({20, 20, 1});
  CHECK(ssim(c3, c3) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ssim(Tensor<double>({8, 8}), Tensor<double>({8, 8})), ShapeError);
  CHECK_THROWS_AS(ssim(Tensor<double>({20, 20, 2}), Tensor<double>({20, 20, 2})), ShapeError);
}

TEST_CASE("closed-form parameter counts") {
  PredictorConfig c;
  c.kind = CellKind::kConvLstm;
  c.channels = {2};
  c.kernel = 3;
  const auto r = count_params(c);
  CHECK(r.total_params() == 9 * (1 + 2) * 8 + 8 + 2 + 1);
  c.kernel = 1;
  c.bias = false;
  CHECK(count_params(c).total_params() == (1 + 2) * 8 + 2 + 1);

  const auto csv = r.to_csv();
  CHECK(csv.rfind("layer,params,flops\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == long(r.layers.size()) + 2);
  CHECK(r.to_text().find("total") != std::string::npos);
}

TEST_CASE("counted FLOPs match the instrumented forward pass") {
  for (CellKind kind : {CellKind::kConvLstm, CellKind::kConvTtLstm}) {
    for (bool sig : {false, true}) {
      PredictorConfig c;
      c.kind = kind;
      c.channels = {4, 6, 4};
      c.skips = {{1, 3}};
      c.kernel = 3;
      c.order = 3;
      c.steps = 4;
      c.ranks = {3};
      c.head_sigmoid = sig;
      auto p = Predictor<double>::build(c, 1);
      p.reset(7, 9);
      const auto frame = Var<double>::constant(Tensor<double>({7, 9, 1}, 0.5));
      p.step(frame);
      flops::Scope meter;
      p.step(frame);
      CHECK(meter.count() == count_flops(c, 7, 9).total_flops());
    }
  }
}

TEST_CASE("the linear algorithm is cheaper than the naive one") {
  const CttShape s{3, {4, 4, 4, 4}};
  CHECK(ctt_flops(s, 8, 8, CttAlgorithm::kLinear) < ctt_flops(s, 8, 8, CttAlgorithm::kNaive));
  const CttShape one{3, {4, 4}};
  CHECK(ctt_flops(one, 8, 8, CttAlgorithm::kLinear) == ctt_flops(one, 8, 8, CttAlgorithm::kNaive));
}

TEST_CASE("Conv-TT-LSTM is cheaper than ConvLSTM at the default scale") {
  const auto a = analyze(twelve_layer_config(CellKind::kConvLstm), 64, 64);
  const auto b = analyze(twelve_layer_config(CellKind::kConvTtLstm), 64, 64);
  CHECK(b.total_params() < a.total_params());
  CHECK(b.total_flops() < a.total_flops());
  CHECK(a.layers.size() == 13);
  CHECK(a.layers.back().name == "head");
  CHECK(b.layers[8].params > b.layers[7].params);
}
