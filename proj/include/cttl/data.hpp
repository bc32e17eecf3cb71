// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Bouncing-sprite video sequences (Moving-MNIST style).
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cttl/rng.hpp"
#include "cttl/tensor.hpp"

namespace cttl {

// Square grayscale sprites in [0, 1], either MNIST digits or procedurally
// generated blobs. Blob i is a pure function of (seed, i).
class SpriteSource {
 public:
  static SpriteSource from_idx(const std::filesystem::path& images);
  static SpriteSource from_sprites(std::vector<Tensor<float>> sprites);
  static SpriteSource synthetic(std::uint64_t seed, std::size_t size = 28);

  std::size_t sprite_size() const noexcept { return size_; }
  // Number of distinct sprites to draw from.
  std::size_t count() const noexcept;
  // [size, size] sprite.
  Tensor<float> sprite(std::size_t i) const;

 private:
  std::vector<Tensor<float>> bank_;
  std::uint64_t seed_ = 0;
  std::size_t size_ = 28;
  bool synthetic_ = false;
};

// Gaussian bumps summed and clamped to [0, 1].
Tensor<float> synthetic_blob(std::uint64_t seed, std::size_t size);

struct GeneratorConfig {
  std::size_t canvas = 64;
  std::size_t num_sprites = 2;
  double speed_min = 2.0;  // px / frame
  double speed_max = 5.0;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

// Top-left anchored position and velocity of one sprite.
struct MotionState {
  double y = 0, x = 0;
  double vy = 0, vx = 0;
};

// Uniform placement over valid positions, angle uniform in [0, 2 pi), speed
// uniform in [speed_min, speed_max].
MotionState random_motion(const GeneratorConfig& cfg, std::size_t sprite_size, Rng& rng);
// One frame of motion with elastic reflection off the walls; `limit` is the
// largest valid anchor coordinate, canvas - sprite_size.
void advance(MotionState& m, double limit);
// Max-composites sprites at their nearest integer anchors onto a
// [canvas, canvas] frame.
Tensor<float> render(std::span<const Tensor<float>> sprites, std::span<const MotionState> motion,
                     std::size_t canvas);

// [length, canvas, canvas, 1]. Draws sprites and motion from `rng`, renders
// frame 0 at the initial placement. Optionally reports the trajectory.
Tensor<float> generate_sequence(const SpriteSource& source, const GeneratorConfig& cfg,
                                std::size_t length, Rng& rng,
                                std::vector<std::vector<MotionState>>* trajectory = nullptr);

// `count` sequences; sequence i uses the stream derived from (seed, split, i).
std::vector<Tensor<float>> generate_split(const SpriteSource& source, const GeneratorConfig& cfg,
                                          std::size_t count, std::size_t length,
                                          std::uint64_t seed, std::uint64_t split);
// Same stream layout, streamed to a [count, length, canvas, canvas, 1] container.
void write_split(const std::filesystem::path& path, const SpriteSource& source,
                 const GeneratorConfig& cfg, std::size_t count, std::size_t length,
                 std::uint64_t seed, std::uint64_t split);

// Frame t of a [T, h, w, c] sequence as [h, w, c].
Tensor<float> frame_at(const Tensor<float>& seq, std::size_t t);

}  // namespace cttl
