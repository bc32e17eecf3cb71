// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/ctt.hpp"

#include <algorithm>
#include <functional>
#include <string>

#include "cttl/rng.hpp"

namespace cttl {

std::size_t CttShape::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t i = 1; i < ranks.size(); ++i) total += kernel * kernel * ranks[i] * ranks[i - 1];
  return total;
}

namespace {

CttShape shape_from_dims(std::span<const Shape> dims) {
  if (dims.empty()) throw ShapeError("ctt: factor list is empty");
  CttShape s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const Shape& d = dims[i];
    if (d.size() != 4) throw ShapeError("ctt: factor " + std::to_string(i + 1) + " is not rank 4");
    if (d[0] != d[1] || d[0] % 2 == 0)
      throw ShapeError("ctt: factor " + std::to_string(i + 1) +
                       " must be square with odd extent, got " + shape_str(d));
    if (i == 0) {
      s.kernel = d[0];
      s.ranks.push_back(d[3]);
    } else if (d[0] != s.kernel) {
      throw ShapeError("ctt: factors disagree on filter size");
    } else if (d[3] != s.ranks.back()) {
      throw ShapeError("ctt: rank chain broken at factor " + std::to_string(i + 1) + " (writes " +
                       std::to_string(d[3]) + " channels, previous reads " +
                       std::to_string(s.ranks.back()) + ")");
    }
    s.ranks.push_back(d[2]);
  }
  return s;
}

template <typename T>
std::vector<Var<T>> as_constants(std::span<const Tensor<T>> xs) {
  std::vector<Var<T>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(Var<T>::constant(x));
  return out;
}

template <typename T>
void check_states(const char* op, std::span<const Var<T>> states, const CttShape& s) {
  if (states.size() != s.order())
    throw ShapeError(std::string(op) + ": expected " + std::to_string(s.order()) +
                     " inputs, got " + std::to_string(states.size()));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Shape& d = states[i].dims();
    if (d.size() != 3 || d[2] != s.ranks[i + 1])
      throw ShapeError(std::string(op) + ": input " + std::to_string(i + 1) + " has shape " +
                       shape_str(d) + ", factor reads " + std::to_string(s.ranks[i + 1]) +
                       " channels");
    if (d[0] != states[0].dims()[0] || d[1] != states[0].dims()[1])
      throw ShapeError(std::string(op) + ": inputs disagree on spatial extent");
  }
}

}  // namespace

template <typename T>
CttShape ctt_shape(std::span<const Tensor<T>> factors) {
  std::vector<Shape> dims;
  for (const auto& f : factors) dims.push_back(f.dims());
  return shape_from_dims(dims);
}

template <typename T>
CttShape ctt_shape(std::span<const Var<T>> factors) {
  std::vector<Shape> dims;
  for (const auto& f : factors) dims.push_back(f.dims());
  return shape_from_dims(dims);
}

template <typename T>
CttFactors<T> CttFactors<T>::random(const CttShape& shape, std::uint64_t seed) {
  CttFactors<T> f;
  const std::size_t k2 = shape.kernel * shape.kernel;
  for (std::size_t i = 1; i <= shape.order(); ++i) {
    const std::uint64_t s = Rng::derive(seed, {i}).next_u64();
    f.factors.push_back(xavier_init<T>({shape.kernel, shape.kernel, shape.ranks[i], shape.ranks[i - 1]},
                                       k2 * shape.ranks[i], k2 * shape.ranks[i - 1], s));
  }
  return f;
}

template <typename T>
Var<T> reconstruct_kernel(std::span<const Var<T>> factors, std::size_t i) {
  const CttShape s = ctt_shape(factors);
  if (i < 1 || i > s.order())
    throw ShapeError("reconstruct_kernel: index " + std::to_string(i) + " outside 1.." +
                     std::to_string(s.order()));
  Var<T> k = factors[0];
  for (std::size_t j = 2; j <= i; ++j) k = compose_kernels(k, factors[j - 1]);
  return k;
}

template <typename T>
Tensor<T> reconstruct_kernel(const CttFactors<T>& f, std::size_t i) {
  auto vars = as_constants(std::span<const Tensor<T>>(f.factors));
  return reconstruct_kernel(std::span<const Var<T>>(vars), i).value();
}

template <typename T>
Var<T> ctt_naive(std::span<const Var<T>> states, std::span<const Var<T>> factors,
                 PadMode mode) {
  const CttShape s = ctt_shape(factors);
  check_states("ctt_naive", states, s);
  Var<T> kernel = factors[0];
  Var<T> total = conv2d(states[0], kernel, mode);
  for (std::size_t i = 2; i <= s.order(); ++i) {
    kernel = compose_kernels(kernel, factors[i - 1]);
    total = add(total, conv2d(states[i - 1], kernel, mode));
  }
  return total;
}

template <typename T>
Tensor<T> ctt_naive(std::span<const Tensor<T>> states, const CttFactors<T>& f, PadMode mode) {
  auto sv = as_constants(states);
  auto fv = as_constants(std::span<const Tensor<T>>(f.factors));
  return ctt_naive(std::span<const Var<T>>(sv), std::span<const Var<T>>(fv), mode).value();
}

template <typename T>
Var<T> ctt_linear(std::span<const Var<T>> states, std::span<const Var<T>> factors,
                  PadMode mode) {
  const CttShape s = ctt_shape(factors);
  check_states("ctt_linear", states, s);
  const std::size_t n = s.order();
  // V(N) = 0, so the first convolution reads H~(N) directly.
  Var<T> v = conv2d(states[n - 1], factors[n - 1], mode);
  for (std::size_t i = n - 1; i >= 1; --i) v = conv2d(add(v, states[i - 1]), factors[i - 1], mode);
  return v;
}

template <typename T>
Tensor<T> ctt_linear(std::span<const Tensor<T>> states, const CttFactors<T>& f, PadMode mode) {
  auto sv = as_constants(states);
  auto fv = as_constants(std::span<const Tensor<T>>(f.factors));
  return ctt_linear(std::span<const Var<T>>(sv), std::span<const Var<T>>(fv), mode).value();
}

template <typename T>
Var<T> ctt_apply(std::span<const Var<T>> states, std::span<const Var<T>> factors,
                 PadMode mode, CttAlgorithm alg) {
  return alg == CttAlgorithm::kNaive ? ctt_naive(states, factors, mode)
                                     : ctt_linear(states, factors, mode);
}

// ---------------------------------------------------------------------------

std::size_t TtShape::out_channels() const {
  return std::accumulate(out_factors.begin(), out_factors.end(), std::size_t{1},
                         std::multiplies<>());
}

std::size_t TtShape::in_channels() const {
  return std::accumulate(in_factors.begin(), in_factors.end(), std::size_t{1},
                         std::multiplies<>());
}

void TtShape::validate() const {
  const std::size_t n = order();
  if (n == 0) throw ShapeError("tt: order must be positive");
  if (kernel == 0 || kernel % 2 == 0) throw ShapeError("tt: kernel extent must be odd");
  if (in_factors.size() != n || ranks.size() != n)
    throw ShapeError("tt: expected " + std::to_string(n) + " input factors and ranks");
  auto positive = [](std::size_t v) { return v > 0; };
  if (!std::all_of(out_factors.begin(), out_factors.end(), positive) ||
      !std::all_of(in_factors.begin(), in_factors.end(), positive) ||
      !std::all_of(ranks.begin(), ranks.end(), positive))
    throw ShapeError("tt: factor extents and ranks must be positive");
}

std::vector<Shape> TtShape::factor_shapes() const {
  validate();
  std::vector<Shape> out;
  out.push_back({kernel, kernel, ranks[0]});
  const std::size_t n = order();
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n)
      out.push_back({out_factors[i], in_factors[i], ranks[i], ranks[i + 1]});
    else
      out.push_back({out_factors[i], in_factors[i], ranks[i]});
  }
  return out;
}

std::size_t TtShape::parameter_count() const {
  std::size_t total = 0;
  for (const auto& s : factor_shapes()) total += shape_size(s);
  return total;
}

std::vector<std::size_t> balanced_factorization(std::size_t n, std::size_t parts) {
  if (parts == 0) throw ConfigError("balanced_factorization: zero parts");
  if (n == 0) throw ConfigError("balanced_factorization: cannot factor zero");
  std::vector<std::size_t> primes;
  std::size_t m = n;
  for (std::size_t p = 2; p * p <= m; ++p)
    while (m % p == 0) {
      primes.push_back(p);
      m /= p;
    }
  if (m > 1) primes.push_back(m);
  std::sort(primes.rbegin(), primes.rend());
  std::vector<std::size_t> out(parts, 1);
  for (std::size_t p : primes) *std::min_element(out.begin(), out.end()) *= p;
  std::sort(out.rbegin(), out.rend());
  return out;
}

template <typename T>
void TtCompressedKernel<T>::validate() const {
  const auto shapes = shape.factor_shapes();
  if (factors.size() != shapes.size())
    throw ShapeError("tt: expected " + std::to_string(shapes.size()) + " factors");
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (factors[i].dims() != shapes[i])
      throw ShapeError("tt: factor " + std::to_string(i) + " has shape " +
                       shape_str(factors[i].dims()) + ", expected " + shape_str(shapes[i]));
}

template <typename T>
TtCompressedKernel<T> TtCompressedKernel<T>::random(const TtShape& shape, std::uint64_t seed) {
  TtCompressedKernel<T> k;
  k.shape = shape;
  const auto shapes = shape.factor_shapes();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Shape& d = shapes[i];
    std::size_t fan_in, fan_out;
    if (i == 0) {
      fan_in = d[0] * d[1];
      fan_out = d[2];
    } else {
      fan_in = d[1] * d[2];
      fan_out = d[0] * (d.size() == 4 ? d[3] : 1);
    }
    k.factors.push_back(xavier_init<T>(d, fan_in, fan_out, Rng::derive(seed, {i}).next_u64()));
  }
  return k;
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape dims) {
  Shape original = x.dims();
  return Tape<T>::apply(
      x.value().reshaped(std::move(dims)), {x},
      [original](const Node<T>&, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        if (pg[0]) accumulate(*pg[0], g.reshaped(original));
      });
}

template <typename T>
Var<T> tt_merge(const Var<T>& prefix, const Var<T>& core) {
  const Shape& q = prefix.dims();
  const Shape& c = core.dims();
  if (q.size() != 4 || c.size() != 4 || q[3] != c[2])
    throw ShapeError("tt_merge: incompatible " + shape_str(q) + " and " + shape_str(c));
  const std::size_t ta = q[0], sa = q[1], r0 = q[2], rm = q[3];
  const std::size_t tb = c[0], sb = c[1], rn = c[3];
  Tensor<T> out({ta * tb, sa * sb, r0, rn});
  const Tensor<T>& qv = prefix.value();
  const Tensor<T>& cv = core.value();
  auto out_at = [&](std::size_t a, std::size_t b, std::size_t s1, std::size_t s2, std::size_t r) {
    return (((a * tb + b) * (sa * sb) + (s1 * sb + s2)) * r0 + r) * rn;
  };
  for (std::size_t a = 0; a < ta; ++a)
    for (std::size_t s1 = 0; s1 < sa; ++s1)
      for (std::size_t r = 0; r < r0; ++r)
        for (std::size_t m = 0; m < rm; ++m) {
          const T qval = qv[((a * sa + s1) * r0 + r) * rm + m];
          for (std::size_t b = 0; b < tb; ++b)
            for (std::size_t s2 = 0; s2 < sb; ++s2) {
              const T* cp = cv.raw() + ((b * sb + s2) * rm + m) * rn;
              T* op = out.raw() + out_at(a, b, s1, s2, r);
              for (std::size_t n = 0; n < rn; ++n) op[n] += qval * cp[n];
            }
        }
  return Tape<T>::apply(
      std::move(out), {prefix, core},
      [=](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        const Tensor<T>& qv = self.parents[0]->value;
        const Tensor<T>& cv = self.parents[1]->value;
        for (std::size_t a = 0; a < ta; ++a)
          for (std::size_t s1 = 0; s1 < sa; ++s1)
            for (std::size_t r = 0; r < r0; ++r)
              for (std::size_t m = 0; m < rm; ++m) {
                const std::size_t qi = ((a * sa + s1) * r0 + r) * rm + m;
                T dq = 0;
                for (std::size_t b = 0; b < tb; ++b)
                  for (std::size_t s2 = 0; s2 < sb; ++s2) {
                    const std::size_t ci = ((b * sb + s2) * rm + m) * rn;
                    const T* gp =
                        g.raw() + (((a * tb + b) * (sa * sb) + (s1 * sb + s2)) * r0 + r) * rn;
                    for (std::size_t n = 0; n < rn; ++n) {
                      dq += gp[n] * cv[ci + n];
                      if (pg[1]) (*pg[1])[ci + n] += gp[n] * qv[qi];
                    }
                  }
                if (pg[0]) (*pg[0])[qi] += dq;
              }
      });
}

template <typename T>
Var<T> tt_spatial(const Var<T>& spatial, const Var<T>& chain) {
  const Shape& gd = spatial.dims();
  const Shape& qd = chain.dims();
  if (gd.size() != 3 || qd.size() != 4 || qd[3] != 1 || gd[2] != qd[2])
    throw ShapeError("tt_spatial: incompatible " + shape_str(gd) + " and " + shape_str(qd));
  const std::size_t kh = gd[0], kw = gd[1], r0 = gd[2], t = qd[0], s = qd[1];
  Tensor<T> out({kh, kw, s, t});
  const Tensor<T>& g0 = spatial.value();
  const Tensor<T>& q = chain.value();
  for (std::size_t p = 0; p < kh * kw; ++p)
    for (std::size_t si = 0; si < s; ++si)
      for (std::size_t ti = 0; ti < t; ++ti) {
        T acc = 0;
        for (std::size_t r = 0; r < r0; ++r) acc += g0[p * r0 + r] * q[(ti * s + si) * r0 + r];
        out[(p * s + si) * t + ti] = acc;
      }
  return Tape<T>::apply(
      std::move(out), {spatial, chain},
      [=](const Node<T>& self, const Tensor<T>& g, std::span<Tensor<T>* const> pg) {
        const Tensor<T>& g0 = self.parents[0]->value;
        const Tensor<T>& q = self.parents[1]->value;
        for (std::size_t p = 0; p < kh * kw; ++p)
          for (std::size_t si = 0; si < s; ++si)
            for (std::size_t ti = 0; ti < t; ++ti) {
              const T gv = g[(p * s + si) * t + ti];
              for (std::size_t r = 0; r < r0; ++r) {
                if (pg[0]) (*pg[0])[p * r0 + r] += gv * q[(ti * s + si) * r0 + r];
                if (pg[1]) (*pg[1])[(ti * s + si) * r0 + r] += gv * g0[p * r0 + r];
              }
            }
      });
}

template <typename T>
Var<T> tt_reconstruct_w(const TtShape& shape, std::span<const Var<T>> factors) {
  const auto shapes = shape.factor_shapes();
  if (factors.size() != shapes.size())
    throw ShapeError("tt_reconstruct_w: expected " + std::to_string(shapes.size()) + " factors");
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (factors[i].dims() != shapes[i])
      throw ShapeError("tt_reconstruct_w: factor " + std::to_string(i) + " has shape " +
                       shape_str(factors[i].dims()) + ", expected " + shape_str(shapes[i]));
  const std::size_t n = shape.order();
  auto as_core = [&](std::size_t i) {
    const Var<T>& f = factors[i];
    if (f.dims().size() == 4) return f;
    Shape d = f.dims();
    d.push_back(1);
    return reshape(f, d);
  };
  Var<T> chain = as_core(1);
  for (std::size_t i = 2; i <= n; ++i) chain = tt_merge(chain, as_core(i));
  return tt_spatial(factors[0], chain);
}

template <typename T>
Tensor<T> tt_reconstruct_w(const TtCompressedKernel<T>& k) {
  k.validate();
  auto fv = as_constants(std::span<const Tensor<T>>(k.factors));
  return tt_reconstruct_w(k.shape, std::span<const Var<T>>(fv)).value();
}

#define CTTL_INSTANTIATE_CTT(T)                                                             \
  template CttShape ctt_shape(std::span<const Tensor<T>>);                                  \
  template CttShape ctt_shape(std::span<const Var<T>>);                                     \
  template struct CttFactors<T>;                                                            \
  template Var<T> reconstruct_kernel(std::span<const Var<T>>, std::size_t);                 \
  template Tensor<T> reconstruct_kernel(const CttFactors<T>&, std::size_t);                 \
  template Var<T> ctt_naive(std::span<const Var<T>>, std::span<const Var<T>>, PadMode);     \
  template Tensor<T> ctt_naive(std::span<const Tensor<T>>, const CttFactors<T>&, PadMode);  \
  template Var<T> ctt_linear(std::span<const Var<T>>, std::span<const Var<T>>, PadMode);    \
  template Tensor<T> ctt_linear(std::span<const Tensor<T>>, const CttFactors<T>&, PadMode); \
  template Var<T> ctt_apply(std::span<const Var<T>>, std::span<const Var<T>>, PadMode,      \
                            CttAlgorithm);                                                  \
  template struct TtCompressedKernel<T>;                                                    \
  template Var<T> tt_reconstruct_w(const TtShape&, std::span<const Var<T>>);                \
  template Tensor<T> tt_reconstruct_w(const TtCompressedKernel<T>&);                        \
  template Var<T> reshape(const Var<T>&, Shape);                                            \
  template Var<T> tt_merge(const Var<T>&, const Var<T>&);                                   \
  template Var<T> tt_spatial(const Var<T>&, const Var<T>&);

CTTL_INSTANTIATE_CTT(float)
CTTL_INSTANTIATE_CTT(double)

}  // namespace cttl
