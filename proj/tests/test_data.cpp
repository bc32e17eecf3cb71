// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include <cmath>

#include "cttl/data.hpp"
#include "cttl/io.hpp"
#include "cttl/training.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cttl;
using cttl::testing::TempDir;

TEST_CASE("synthetic sprites") {
  const auto a = synthetic_blob(4, 28);
  CHECK(a.dims() == Shape{28, 28});
  CHECK(synthetic_blob(4, 28) == a);
  CHECK_FALSE(synthetic_blob(5, 28) == a);
  double peak = 0;
  for (float v : a.data()) {
    CHECK((v >= 0.0f && v <= 1.0f));
    peak = std::max(peak, double(v));
  }
  CHECK(peak > 0.5);
  const auto src = SpriteSource::synthetic(3, 7);
  CHECK(src.sprite_size() == 7);
  CHECK(src.sprite(2) == src.sprite(2));
  CHECK_THROWS_AS(src.sprite(src.count()), ShapeError);
  CHECK_THROWS_AS(SpriteSource::from_sprites({}), ConfigError);
  CHECK_THROWS_AS(SpriteSource::from_sprites({Tensor<float>({2, 2}), Tensor<float>({3, 3})}), ShapeError);
}

TEST_CASE("trajectories stay inside the canvas and conserve speed") {
  const auto src = SpriteSource::synthetic(1);
  const GeneratorConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<std::vector<MotionState>> traj;
    const auto seq = generate_sequence(src, cfg, 30, rng, &traj);
    CHECK(seq.dims() == Shape{30, 64, 64, 1});
    REQUIRE(traj.size() == 30);
    for (std::size_t k = 0; k < 2; ++k) {
      const double speed = std::hypot(traj[0][k].vy, traj[0][k].vx);
      CHECK(speed >= 2.0);
      CHECK(speed <= 5.0);
      for (const auto& frame : traj) {
        const auto& m = frame[k];
        CHECK((m.y >= 0 && m.y + 28 <= 64 && m.x >= 0 && m.x + 28 <= 64));
        CHECK(std::hypot(m.vy, m.vx) == doctest::Approx(speed).epsilon(1e-12));
      }
    }
    for (float v : seq.data()) CHECK((v >= 0.0f && v <= 1.0f));
  }
}

TEST_CASE("reflection at the walls") {
  MotionState m{35.0, 10.0, 2.0, -3.0};
  advance(m, 36.0);
  CHECK(m.y == 35.0);
  CHECK(m.vy == -2.0);
  CHECK(m.x == 7.0);
  CHECK(m.vx == -3.0);
  MotionState w{0.0, 1.0, -4.0, -2.5};
  advance(w, 36.0);
  CHECK(w.y == 4.0);
  CHECK(w.vy == 4.0);
  CHECK(w.x == 1.5);
  CHECK(w.vx == 2.5);
  MotionState still{3.0, 4.0, 0.0, 0.0};
  advance(still, 36.0);
  CHECK(still.y == 3.0);
  CHECK(still.x == 4.0);
}

TEST_CASE("zero speed gives a static sequence") {
  const auto src = SpriteSource::synthetic(2, 6);
  GeneratorConfig cfg{16, 2, 0.0, 0.0};
  Rng rng(1);
  const auto seq = generate_sequence(src, cfg, 5, rng);
  for (std::size_t t = 1; t < 5; ++t) CHECK(frame_at(seq, t) == frame_at(seq, 0));
}

TEST_CASE("rendering composites by maximum") {
  Tensor<float> a({2, 2}, 0.25f), b({2, 2}, 0.75f);
  const std::vector<Tensor<float>> sprites{a, b};
  const std::vector<MotionState> motion{{0, 0, 0, 0}, {1.4, 1.6, 0, 0}};
  const auto f = render(sprites, motion, 4);
  CHECK(f.at(0, 0) == 0.25f);
  CHECK(f.at(1, 2) == 0.75f);
  CHECK(f.at(1, 1) == 0.25f);
  CHECK(f.at(3, 3) == 0.0f);
  const std::vector<MotionState> out{{3, 0, 0, 0}, {0, 0, 0, 0}};
  CHECK_THROWS_AS(render(sprites, out, 4), ShapeError);
}

TEST_CASE("generator errors") {
  const auto src = SpriteSource::synthetic(1);
  Rng rng(1);
  CHECK_THROWS_AS(generate_sequence(src, GeneratorConfig{16, 2, 2, 5}, 3, rng), ConfigError);
  CHECK_THROWS_AS(generate_sequence(src, GeneratorConfig{}, 0, rng), ConfigError);
  CHECK_THROWS_AS(generate_sequence(src, GeneratorConfig{64, 2, 3, 2}, 3, rng), ConfigError);
}

TEST_CASE("splits are deterministic and streamed identically") {
  const auto src = SpriteSource::synthetic(9, 6);
  const GeneratorConfig cfg{16, 2, 0.5, 1.25};
  const auto a = generate_split(src, cfg, 6, 4, 11, 0);
  const auto b = generate_split(src, cfg, 6, 4, 11, 0);
  const auto c = generate_split(src, cfg, 6, 4, 11, 1);
  REQUIRE(a.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a[i] == b[i]);
    CHECK_FALSE(a[i] == c[i]);
  }
  CHECK_FALSE(a[0] == a[1]);

  TempDir dir("split");
  write_split(dir / "s.tc", src, cfg, 6, 4, 11, 0);
  FileSequences file(dir / "s.tc");
  CHECK(file.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(file.at(i) == a[i]);
  write_split(dir / "t.tc", src, cfg, 6, 4, 11, 0);
  CHECK(file_checksum(dir / "s.tc") == file_checksum(dir / "t.tc"));
}

TEST_CASE("frame access") {
  Tensor<float> seq({3, 2, 2, 1});
  seq[4 * 2 + 1] = 0.5f;
  CHECK(frame_at(seq, 2).dims() == Shape{2, 2, 1});
  CHECK(frame_at(seq, 2)[1] == 0.5f);
  CHECK_THROWS_AS(frame_at(seq, 3), ShapeError);
  CHECK_THROWS_AS(frame_at(Tensor<float>({2, 2}), 0), ShapeError);
}
