// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/ops.hpp"

#include <cmath>
#include <string>

#include "cttl/rng.hpp"

namespace cttl {

namespace flops {
std::uint64_t& counter() noexcept {
  thread_local std::uint64_t value = 0;
  return value;
}
}  // namespace flops

namespace {

void add_flops(std::uint64_t n) { flops::counter() += n; }

void require_rank(const char* op, const Shape& dims, std::size_t rank) {
  if (dims.size() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(dims));
}

template <typename T>
void require_same(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.dims()) + " vs " +
                     shape_str(b.dims()));
}

// Source row/column for output coordinate `pos` and tap offset. Returns -1 when
// the read falls outside under zero padding.
inline long source_index(long pos, long tap, long radius, long extent, PadMode mode) {
  long s = pos + tap - radius;
  if (s >= 0 && s < extent) return s;
  if (mode == PadMode::kZeroSame) return -1;
  s %= extent;
  return s < 0 ? s + extent : s;
}

struct ConvDims {
  std::size_t h, w, ci, kh, kw, co;
};

template <typename T>
ConvDims check_conv(const char* op, const Shape& in, const Tensor<T>& kernel) {
  require_rank(op, in, 3);
  require_rank(op, kernel.dims(), 4);
  const auto& k = kernel.dims();
  if (k[0] % 2 == 0 || k[1] % 2 == 0)
    throw ShapeError(std::string(op) + ": kernel extents must be odd, got " + shape_str(k));
  if (k[2] != in[2])
    throw ShapeError(std::string(op) + ": kernel expects " + std::to_string(k[2]) +
                     " input channels, input has " + std::to_string(in[2]));
  return {in[0], in[1], in[2], k[0], k[1], k[3]};
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, PadMode mode) {
  const ConvDims d = check_conv("conv2d", input.dims(), kernel);
  Tensor<T> out({d.h, d.w, d.co});
  const long rh = static_cast<long>(d.kh / 2), rw = static_cast<long>(d.kw / 2);
  const T* in = input.raw();
  const T* ker = kernel.raw();
  T* o = out.raw();
  for (std::size_t y = 0; y < d.h; ++y) {
    for (std::size_t dy = 0; dy < d.kh; ++dy) {
      const long yy = source_index(long(y), long(dy), rh, long(d.h), mode);
      if (yy < 0) continue;
      for (std::size_t x = 0; x < d.w; ++x) {
        T* op = o + (y * d.w + x) * d.co;
        for (std::size_t dx = 0; dx < d.kw; ++dx) {
          const long xx = source_index(long(x), long(dx), rw, long(d.w), mode);
          if (xx < 0) continue;
          const T* ip = in + (std::size_t(yy) * d.w + std::size_t(xx)) * d.ci;
          const T* kp = ker + (dy * d.kw + dx) * d.ci * d.co;
          for (std::size_t i = 0; i < d.ci; ++i) {
            const T v = ip[i];
            const T* kr = kp + i * d.co;
            for (std::size_t c = 0; c < d.co; ++c) op[c] += v * kr[c];
          }
        }
      }
    }
  }
  add_flops(2ull * d.kh * d.kw * d.ci * d.co * d.h * d.w);
  return out;
}

template <typename T>
Tensor<T> conv2d_grad_input(const Tensor<T>& grad_out, const Tensor<T>& kernel,
                            PadMode mode) {
  require_rank("conv2d_grad_input", grad_out.dims(), 3);
  require_rank("conv2d_grad_input", kernel.dims(), 4);
  const auto& k = kernel.dims();
  if (k[3] != grad_out.dim(2)) throw ShapeError("conv2d_grad_input: channel mismatch");
  const std::size_t h = grad_out.dim(0), w = grad_out.dim(1), kh = k[0], kw = k[1],
                    ci = k[2], co = k[3];
  Tensor<T> gin({h, w, ci});
  const long rh = long(kh / 2), rw = long(kw / 2);
  const T* g = grad_out.raw();
  const T* ker = kernel.raw();
  T* gi = gin.raw();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t dy = 0; dy < kh; ++dy) {
      const long yy = source_index(long(y), long(dy), rh, long(h), mode);
      if (yy < 0) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const T* gp = g + (y * w + x) * co;
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const long xx = source_index(long(x), long(dx), rw, long(w), mode);
          if (xx < 0) continue;
          T* gip = gi + (std::size_t(yy) * w + std::size_t(xx)) * ci;
          const T* kp = ker + (dy * kw + dx) * ci * co;
          for (std::size_t i = 0; i < ci; ++i) {
            const T* kr = kp + i * co;
            T s = 0;
            for (std::size_t c = 0; c < co; ++c) s += gp[c] * kr[c];
            gip[i] += s;
          }
        }
      }
    }
  }
  add_flops(2ull * kh * kw * ci * co * h * w);
  return gin;
}

template <typename T>
Tensor<T> conv2d_grad_kernel(const Tensor<T>& input, const Tensor<T>& grad_out,
                             std::size_t kh, std::size_t kw, PadMode mode) {
  require_rank("conv2d_grad_kernel", input.dims(), 3);
  require_rank("conv2d_grad_kernel", grad_out.dims(), 3);
  const std::size_t h = input.dim(0), w = input.dim(1), ci = input.dim(2),
                    co = grad_out.dim(2);
  if (grad_out.dim(0) != h || grad_out.dim(1) != w)
    throw ShapeError("conv2d_grad_kernel: spatial mismatch");
  Tensor<T> gk({kh, kw, ci, co});
  const long rh = long(kh / 2), rw = long(kw / 2);
  const T* in = input.raw();
  const T* g = grad_out.raw();
  T* gkp = gk.raw();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t dy = 0; dy < kh; ++dy) {
      const long yy = source_index(long(y), long(dy), rh, long(h), mode);
      if (yy < 0) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const T* gp = g + (y * w + x) * co;
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const long xx = source_index(long(x), long(dx), rw, long(w), mode);
          if (xx < 0) continue;
          const T* ip = in + (std::size_t(yy) * w + std::size_t(xx)) * ci;
          T* kp = gkp + (dy * kw + dx) * ci * co;
          for (std::size_t i = 0; i < ci; ++i) {
            const T v = ip[i];
            T* kr = kp + i * co;
            for (std::size_t c = 0; c < co; ++c) kr[c] += v * gp[c];
          }
        }
      }
    }
  }
  add_flops(2ull * kh * kw * ci * co * h * w);
  return gk;
}

template <typename T>
Tensor<T> compose_kernels(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("compose_kernels", a.dims(), 4);
  require_rank("compose_kernels", b.dims(), 4);
  const auto& ad = a.dims();
  const auto& bd = b.dims();
  if (ad[2] != bd[3])
    throw ShapeError("compose_kernels: middle channels differ (" + std::to_string(ad[2]) +
                     " vs " + std::to_string(bd[3]) + ")");
  const std::size_t kah = ad[0], kaw = ad[1], cm = ad[2], co = ad[3];
  const std::size_t kbh = bd[0], kbw = bd[1], ci = bd[2];
  const std::size_t rh = kah + kbh - 1, rw = kaw + kbw - 1;
  Tensor<T> out({rh, rw, ci, co});
  T* r = out.raw();
  for (std::size_t uy = 0; uy < kbh; ++uy)
    for (std::size_t ux = 0; ux < kbw; ++ux) {
      const T* bp = b.raw() + (uy * kbw + ux) * ci * cm;
      for (std::size_t vy = 0; vy < kah; ++vy)
        for (std::size_t vx = 0; vx < kaw; ++vx) {
          const T* ap = a.raw() + (vy * kaw + vx) * cm * co;
          T* rp = r + ((uy + vy) * rw + (ux + vx)) * ci * co;
          for (std::size_t i = 0; i < ci; ++i)
            for (std::size_t m = 0; m < cm; ++m) {
              const T s = bp[i * cm + m];
              const T* ar = ap + m * co;
              T* rr = rp + i * co;
              for (std::size_t c = 0; c < co; ++c) rr[c] += s * ar[c];
            }
        }
    }
  add_flops(2ull * kah * kaw * kbh * kbw * ci * cm * co);
  return out;
}

template <typename T>
void compose_kernels_grad(const Tensor<T>& grad_out, const Tensor<T>& a, const Tensor<T>& b,
                          Tensor<T>* grad_a, Tensor<T>* grad_b) {
  const auto& ad = a.dims();
  const auto& bd = b.dims();
  const std::size_t kah = ad[0], kaw = ad[1], cm = ad[2], co = ad[3];
  const std::size_t kbh = bd[0], kbw = bd[1], ci = bd[2];
  const std::size_t rw = kaw + kbw - 1;
  if (grad_out.dims() != Shape{kah + kbh - 1, rw, ci, co})
    throw ShapeError("compose_kernels_grad: gradient shape mismatch");
  if (grad_a) *grad_a = Tensor<T>(ad);
  if (grad_b) *grad_b = Tensor<T>(bd);
  for (std::size_t uy = 0; uy < kbh; ++uy)
    for (std::size_t ux = 0; ux < kbw; ++ux) {
      const T* bp = b.raw() + (uy * kbw + ux) * ci * cm;
      T* gbp = grad_b ? grad_b->raw() + (uy * kbw + ux) * ci * cm : nullptr;
      for (std::size_t vy = 0; vy < kah; ++vy)
        for (std::size_t vx = 0; vx < kaw; ++vx) {
          const T* ap = a.raw() + (vy * kaw + vx) * cm * co;
          T* gap = grad_a ? grad_a->raw() + (vy * kaw + vx) * cm * co : nullptr;
          const T* gp = grad_out.raw() + ((uy + vy) * rw + (ux + vx)) * ci * co;
          for (std::size_t i = 0; i < ci; ++i)
            for (std::size_t m = 0; m < cm; ++m) {
              const T s = bp[i * cm + m];
              const T* gr = gp + i * co;
              const T* ar = ap + m * co;
              if (gap) {
                T* gar = gap + m * co;
                for (std::size_t c = 0; c < co; ++c) gar[c] += s * gr[c];
              }
              if (gbp) {
                T acc = 0;
                for (std::size_t c = 0; c < co; ++c) acc += gr[c] * ar[c];
                gbp[i * cm + m] += acc;
              }
            }
        }
    }
  add_flops(2ull * kah * kaw * kbh * kbw * ci * cm * co * ((grad_a ? 1 : 0) + (grad_b ? 1 : 0)));
}

template <typename T>
Tensor<T> flip_kernel(const Tensor<T>& kernel) {
  require_rank("flip_kernel", kernel.dims(), 4);
  const auto& d = kernel.dims();
  Tensor<T> out(d);
  const std::size_t inner = d[2] * d[3];
  for (std::size_t y = 0; y < d[0]; ++y)
    for (std::size_t x = 0; x < d[1]; ++x) {
      const T* src = kernel.raw() + (y * d[1] + x) * inner;
      T* dst = out.raw() + ((d[0] - 1 - y) * d[1] + (d[1] - 1 - x)) * inner;
      std::copy(src, src + inner, dst);
    }
  return out;
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: empty list");
  const std::size_t h = parts[0].dims().size() == 3 ? parts[0].dim(0) : 0;
  std::size_t w = 0, total = 0;
  for (const auto& p : parts) {
    require_rank("concat_channels", p.dims(), 3);
    if (w == 0) w = p.dim(1);
    if (p.dim(0) != h || p.dim(1) != w)
      throw ShapeError("concat_channels: spatial mismatch " + shape_str(parts[0].dims()) +
                       " vs " + shape_str(p.dims()));
    total += p.dim(2);
  }
  Tensor<T> out({h, w, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.dim(2);
    for (std::size_t s = 0; s < h * w; ++s)
      std::copy(p.raw() + s * c, p.raw() + (s + 1) * c, out.raw() + s * total + offset);
    offset += c;
  }
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_rank("slice_channels", x.dims(), 3);
  const std::size_t c = x.dim(2);
  if (begin + count > c) throw ShapeError("slice_channels: range exceeds channel extent");
  const std::size_t hw = x.dim(0) * x.dim(1);
  Tensor<T> out({x.dim(0), x.dim(1), count});
  for (std::size_t s = 0; s < hw; ++s)
    std::copy(x.raw() + s * c + begin, x.raw() + s * c + begin + count, out.raw() + s * count);
  return out;
}

namespace {
template <typename T, typename F>
Tensor<T> binary(const char* op, const Tensor<T>& a, const Tensor<T>& b, F f) {
  require_same(op, a, b);
  Tensor<T> out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  add_flops(a.size());
  return out;
}

template <typename T, typename F>
Tensor<T> unary(const Tensor<T>& a, F f) {
  Tensor<T> out(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  add_flops(a.size());
  return out;
}
}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary("add", a, b, [](T x, T y) { return x + y; });
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary("sub", a, b, [](T x, T y) { return x - y; });
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary("mul", a, b, [](T x, T y) { return x * y; });
}
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return unary(a, [s](T x) { return x * s; });
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary(a, [](T x) {
    if (x >= 0) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
  });
}
template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::tanh(x); });
}
template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return unary(a, [](T x) { return std::abs(x); });
}
template <typename T>
Tensor<T> sign(const Tensor<T>& a) {
  return unary(a, [](T x) { return T((x > 0) - (x < 0)); });
}
template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi) {
  return unary(a, [lo, hi](T x) { return x < lo ? lo : (x > hi ? hi : x); });
}
template <typename T>
T sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  add_flops(a.size());
  return s;
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  require_rank("add_channel_bias", bias.dims(), 1);
  const std::size_t c = x.dims().back();
  if (bias.size() != c) throw ShapeError("add_channel_bias: bias length mismatch");
  Tensor<T> out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + bias[i % c];
  add_flops(x.size());
  return out;
}

template <typename T>
Tensor<T> channel_sum(const Tensor<T>& x) {
  const std::size_t c = x.dims().back();
  Tensor<T> out({c});
  for (std::size_t i = 0; i < x.size(); ++i) out[i % c] += x[i];
  return out;
}

template <typename T>
Tensor<T> xavier_init(const Shape& dims, std::size_t fan_in, std::size_t fan_out,
                      std::uint64_t seed) {
  if (fan_in == 0 || fan_out == 0) throw ConfigError("xavier_init: fans must be positive");
  const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  Rng rng(seed);
  Tensor<T> out(dims);
  for (auto& v : out.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return out;
}

#define CTTL_INSTANTIATE_OPS(T)                                                            \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, PadMode);                  \
  template Tensor<T> conv2d_grad_input(const Tensor<T>&, const Tensor<T>&, PadMode);       \
  template Tensor<T> conv2d_grad_kernel(const Tensor<T>&, const Tensor<T>&, std::size_t,   \
                                        std::size_t, PadMode);                             \
  template Tensor<T> compose_kernels(const Tensor<T>&, const Tensor<T>&);                  \
  template void compose_kernels_grad(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                     Tensor<T>*, Tensor<T>*);                              \
  template Tensor<T> flip_kernel(const Tensor<T>&);                                        \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                          \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                           \
  template Tensor<T> sigmoid(const Tensor<T>&);                                            \
  template Tensor<T> tanh(const Tensor<T>&);                                               \
  template Tensor<T> abs(const Tensor<T>&);                                                \
  template Tensor<T> sign(const Tensor<T>&);                                               \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                        \
  template T sum(const Tensor<T>&);                                                        \
  template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> channel_sum(const Tensor<T>&);                                        \
  template Tensor<T> xavier_init<T>(const Shape&, std::size_t, std::size_t, std::uint64_t);

CTTL_INSTANTIATE_OPS(float)
CTTL_INSTANTIATE_OPS(double)

}  // namespace cttl
