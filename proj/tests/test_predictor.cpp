// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/analysis.hpp"
#include "cttl/predictor.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cttl;
using cttl::testing::random_tensor;

namespace {

PredictorConfig tiny(CellKind kind) {
  PredictorConfig c;
  c.kind = kind;
  c.channels = {4, 4};
  c.kernel = 3;
  c.order = 2;
  c.steps = 2;
  c.ranks = {3};
  c.tt_rank = 2;
  return c;
}

std::vector<Var<double>> clip(std::size_t n, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Var<double>> frames;
  for (std::size_t i = 0; i < n; ++i) frames.push_back(Var<double>::constant(random_tensor({h, h, 1}, rng, 0.0, 1.0)));
  return frames;
}

}  // namespace

TEST_CASE("configuration validation") {
  auto c = tiny(CellKind::kConvTtLstm);
  CHECK_NOTHROW(c.validate());
  c.skips = {{2, 1}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.skips = {{1, 3}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.skips = {{1, 2}, {1, 2}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(CellKind::kConvTtLstm);
  c.ranks = {3, 3, 3};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.ranks = {3, 2};
  CHECK_NOTHROW(c.validate());
  c.channels.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(c.layer_input_channels(1), ConfigError);
}

TEST_CASE("twelve-layer stack bookkeeping") {
  const auto c = twelve_layer_config(CellKind::kConvTtLstm);
  CHECK_NOTHROW(c.validate());
  CHECK(c.layers() == 12);
  CHECK(c.layer_input_channels(1) == 1);
  CHECK(c.layer_input_channels(4) == 32);
  CHECK(c.layer_input_channels(9) == 80);
  CHECK(c.layer_input_channels(10) == 48);
  CHECK(c.layer_input_channels(12) == 80);
  const auto specs = c.cell_specs();
  CHECK(specs[8].in_channels == 80);
  CHECK(specs[8].out_channels == 48);

  const auto f = four_layer_config(CellKind::kConvLstm);
  CHECK(f.channels == std::vector<std::size_t>(4, 128));
  CHECK(f.skips.empty());
  CHECK(f.layer_input_channels(2) == 128);
}

TEST_CASE("builds are deterministic in the seed") {
  for (CellKind kind : {CellKind::kConvLstm, CellKind::kConvTtLstm, CellKind::kTtConvLstm}) {
    const auto a = Predictor<double>::build(tiny(kind), 5), b = Predictor<double>::build(tiny(kind), 5);
    const auto c = Predictor<double>::build(tiny(kind), 6);
    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    REQUIRE(pa.size() == pb.size());
    bool differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].value() == pb[i].value());
      differs = differs || !(pa[i].value() == pc[i].value());
    }
    CHECK(differs);
    CHECK(a.parameter_names() == b.parameter_names());
  }
}

TEST_CASE("parameter count agrees with the closed forms") {
  for (CellKind kind : {CellKind::kConvLstm, CellKind::kConvTtLstm, CellKind::kTtConvLstm}) {
    auto c = tiny(kind);
    c.channels = {4, 6, 4};
    c.skips = {{1, 3}};
    const auto p = Predictor<double>::build(c, 1);
    std::size_t n = 0;
    for (const auto& v : p.parameters()) n += v.value().size();
    CHECK(p.parameter_count() == n);
    CHECK(p.parameter_count() == count_params(c).total_params());
  }
}

TEST_CASE("sigmoid head") {
  auto c = tiny(CellKind::kConvTtLstm);
  c.head_sigmoid = true;
  auto p = Predictor<double>::build(c, 2);
  const auto frames = clip(4, 6, 3);
  for (const auto& y : p.rollout(frames, {2, 2, 0.0})) {
    CHECK(y.value().dims() == Shape{6, 6, 1});
    for (double v : y.value().data()) CHECK((v > 0.0 && v < 1.0));
  }
  for (const auto& v : p.parameters()) v.assign(Tensor<double>(v.value().dims()));
  for (const auto& y : p.rollout(frames, {2, 2, 0.0}))
    for (double v : y.value().data()) CHECK(v == 0.5);
}

TEST_CASE("rollout lengths and teacher forcing") {
  auto p = Predictor<double>::build(tiny(CellKind::kConvTtLstm), 4);
  const auto frames = clip(8, 5, 4);
  CHECK(p.rollout(std::span<const Var<double>>(frames).first(3), {3, 5, 0.0}).size() == 5);
  CHECK_THROWS_AS(p.rollout(std::span<const Var<double>>(frames).first(3), {3, 5, 1.0}), ConfigError);
  CHECK_THROWS_AS(p.rollout(frames, {3, 5, 0.5}), ConfigError);
  CHECK_THROWS_AS(p.rollout(frames, {0, 5, 0.0}), ConfigError);

  const auto forced = p.rollout(frames, {3, 5, 1.0});
  auto q = p;
  q.reset(5, 5);
  std::vector<Var<double>> manual;
  for (std::size_t t = 0; t < 7; ++t) {
    const auto y = q.step(frames[t]);
    if (t >= 2) manual.push_back(y);
  }
  REQUIRE(manual.size() == forced.size());
  for (std::size_t k = 0; k < forced.size(); ++k) CHECK(forced[k].value() == manual[k].value());

  const auto free = p.rollout(frames, {3, 5, 0.0});
  CHECK(free[0].value() == forced[0].value());
  CHECK_FALSE(free[2].value() == forced[2].value());

  Rng r1(9), r2(9);
  const auto s1 = p.rollout(frames, {3, 5, 0.5}, &r1), s2 = p.rollout(frames, {3, 5, 0.5}, &r2);
  for (std::size_t k = 0; k < s1.size(); ++k) CHECK(s1[k].value() == s2[k].value());
}

TEST_CASE("copies share parameters and isolate states") {
  auto p = Predictor<double>::build(tiny(CellKind::kConvLstm), 7);
  const auto frames = clip(3, 5, 5);
  auto fresh = p;
  fresh.reset(5, 5);
  const auto expect = fresh.step(frames[0]).value();

  auto q = p;
  q.reset(5, 5);
  q.step(frames[1]);
  q.step(frames[2]);
  p.reset(5, 5);
  CHECK(p.step(frames[0]).value() == expect);

  const auto w = q.parameters()[0];
  auto bumped = w.value();
  bumped[0] += 1.0;
  w.assign(bumped);
  CHECK(p.parameters()[0].value()[0] == bumped[0]);
}

TEST_CASE("frame size changes reset the state") {
  auto p = Predictor<double>::build(tiny(CellKind::kConvTtLstm), 8);
  const auto small = clip(2, 4, 6), big = clip(1, 6, 7);
  p.step(small[0]);
  p.step(small[1]);
  const auto y = p.step(big[0]).value();
  auto q = p;
  q.reset(6, 6);
  CHECK(q.step(big[0]).value() == y);
  CHECK_THROWS_AS(p.step(Var<double>::constant(Tensor<double>({6, 6, 2}))), ShapeError);
}
