// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cttl/error.hpp"
#include "cttl/io.hpp"

namespace cttl {

SpriteSource SpriteSource::from_idx(const std::filesystem::path& images) {
  return from_sprites(read_idx(images));
}

SpriteSource SpriteSource::from_sprites(std::vector<Tensor<float>> sprites) {
  if (sprites.empty()) throw ConfigError("sprite source is empty");
  const std::size_t s = sprites[0].dim(0);
  for (const auto& sp : sprites)
    if (sp.dims() != Shape{s, s}) throw ShapeError("sprites must share one square shape");
  SpriteSource src;
  src.size_ = s;
  src.bank_ = std::move(sprites);
  return src;
}

SpriteSource SpriteSource::synthetic(std::uint64_t seed, std::size_t size) {
  if (size == 0) throw ConfigError("sprite size must be positive");
  SpriteSource src;
  src.seed_ = seed;
  src.size_ = size;
  src.synthetic_ = true;
  return src;
}

std::size_t SpriteSource::count() const noexcept {
  return synthetic_ ? std::size_t{1} << 20 : bank_.size();
}

Tensor<float> SpriteSource::sprite(std::size_t i) const {
  if (i >= count()) throw ShapeError("sprite index out of range");
  if (synthetic_) return synthetic_blob(Rng::derive(seed_, {i}).next_u64(), size_);
  return bank_[i];
}

Tensor<float> synthetic_blob(std::uint64_t seed, std::size_t size) {
  Rng rng(seed);
  const double s = double(size);
  const std::size_t bumps = 2 + rng.below(3);
  struct Bump {
    double cy, cx, sigma, amp;
  };
  std::vector<Bump> b(bumps);
  for (auto& p : b)
    p = {rng.uniform(0.3, 0.7) * (s - 1), rng.uniform(0.3, 0.7) * (s - 1),
         rng.uniform(0.08, 0.16) * s, rng.uniform(0.7, 1.3)};
  Tensor<float> out({size, size});
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      double v = 0;
      for (const auto& p : b) {
        const double dy = double(y) - p.cy, dx = double(x) - p.cx;
        v += p.amp * std::exp(-(dy * dy + dx * dx) / (2 * p.sigma * p.sigma));
      }
      out[y * size + x] = float(std::clamp(v, 0.0, 1.0));
    }
  return out;
}

MotionState random_motion(const GeneratorConfig& cfg, std::size_t sprite_size, Rng& rng) {
  const double limit = double(cfg.canvas - sprite_size);
  MotionState m;
  m.y = rng.uniform(0.0, limit);
  m.x = rng.uniform(0.0, limit);
  const double angle = rng.uniform(0.0, 2 * std::numbers::pi);
  const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
  m.vy = speed * std::sin(angle);
  m.vx = speed * std::cos(angle);
  return m;
}

namespace {
void reflect(double& p, double& v, double limit) {
  p += v;
  while (p < 0 || p > limit) {
    if (p < 0) p = -p;
    else p = 2 * limit - p;
    v = -v;
    if (limit == 0) {
      p = 0;
      break;
    }
  }
}
}  // namespace

void advance(MotionState& m, double limit) {
  reflect(m.y, m.vy, limit);
  reflect(m.x, m.vx, limit);
}

Tensor<float> render(std::span<const Tensor<float>> sprites, std::span<const MotionState> motion,
                     std::size_t canvas) {
  if (sprites.size() != motion.size()) throw ShapeError("render: one motion state per sprite");
  Tensor<float> frame({canvas, canvas});
  for (std::size_t k = 0; k < sprites.size(); ++k) {
    const std::size_t s = sprites[k].dim(0);
    if (s > canvas) throw ConfigError("render: sprite larger than canvas");
    const auto oy = std::size_t(std::lround(motion[k].y));
    const auto ox = std::size_t(std::lround(motion[k].x));
    if (oy + s > canvas || ox + s > canvas) throw ShapeError("render: sprite leaves the canvas");
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        float& dst = frame[(oy + y) * canvas + ox + x];
        dst = std::max(dst, sprites[k][y * s + x]);
      }
  }
  for (auto& v : frame.data()) v = std::clamp(v, 0.0f, 1.0f);
  return frame;
}

Tensor<float> generate_sequence(const SpriteSource& source, const GeneratorConfig& cfg,
                                std::size_t length, Rng& rng,
                                std::vector<std::vector<MotionState>>* trajectory) {
  if (length < 1) throw ConfigError("sequence length must be at least 1");
  const std::size_t s = source.sprite_size();
  if (cfg.canvas < s)
    throw ConfigError("canvas " + std::to_string(cfg.canvas) + " is smaller than sprite " +
                      std::to_string(s));
  if (!(cfg.speed_min >= 0 && cfg.speed_max >= cfg.speed_min))
    throw ConfigError("speed range must satisfy 0 <= min <= max");
  std::vector<Tensor<float>> sprites;
  std::vector<MotionState> motion;
  for (std::size_t k = 0; k < cfg.num_sprites; ++k) {
    sprites.push_back(source.sprite(rng.below(source.count())));
    motion.push_back(random_motion(cfg, s, rng));
  }
  const double limit = double(cfg.canvas - s);
  const std::size_t plane = cfg.canvas * cfg.canvas;
  Tensor<float> seq({length, cfg.canvas, cfg.canvas, 1});
  if (trajectory) trajectory->clear();
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0)
      for (auto& m : motion) advance(m, limit);
    if (trajectory) trajectory->push_back(motion);
    const Tensor<float> frame = render(sprites, motion, cfg.canvas);
    std::copy(frame.raw(), frame.raw() + plane, seq.raw() + t * plane);
  }
  return seq;
}

std::vector<Tensor<float>> generate_split(const SpriteSource& source, const GeneratorConfig& cfg,
                                          std::size_t count, std::size_t length,
                                          std::uint64_t seed, std::uint64_t split) {
  std::vector<Tensor<float>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::derive(seed, {split, i});
    out.push_back(generate_sequence(source, cfg, length, rng));
  }
  return out;
}

void write_split(const std::filesystem::path& path, const SpriteSource& source,
                 const GeneratorConfig& cfg, std::size_t count, std::size_t length,
                 std::uint64_t seed, std::uint64_t split) {
  ContainerWriter w(path, {count, length, cfg.canvas, cfg.canvas, 1});
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::derive(seed, {split, i});
    w.append(generate_sequence(source, cfg, length, rng).data());
  }
  w.close();
}

Tensor<float> frame_at(const Tensor<float>& seq, std::size_t t) {
  const Shape& d = seq.dims();
  if (d.size() != 4) throw ShapeError("frame_at: expected [T, h, w, c], got " + shape_str(d));
  if (t >= d[0]) throw ShapeError("frame_at: frame index out of range");
  const std::size_t plane = d[1] * d[2] * d[3];
  Tensor<float> f({d[1], d[2], d[3]});
  std::copy(seq.raw() + t * plane, seq.raw() + (t + 1) * plane, f.raw());
  return f;
}

}  // namespace cttl
