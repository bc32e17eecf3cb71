// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Scalar reference implementations used as test oracles. Each one is written
// straight from the defining formula with explicit index loops and shares no
// code with the optimized kernels.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cttl/autodiff.hpp"
#include "cttl/tensor.hpp"

namespace cttl::reference {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out[y,x,o] = sum_{dy,dx,i} in[y+dy-kh/2, x+dx-kw/2, i] ker[dy,dx,i,o].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& in, const Tensor<T>& ker, bool circular) {
  const long h = long(in.dim(0)), w = long(in.dim(1)), ci = long(in.dim(2));
  const long kh = long(ker.dim(0)), kw = long(ker.dim(1)), co = long(ker.dim(3));
  Tensor<T> out({std::size_t(h), std::size_t(w), std::size_t(co)});
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (long o = 0; o < co; ++o) {
        T acc = 0;
        for (long dy = 0; dy < kh; ++dy)
          for (long dx = 0; dx < kw; ++dx) {
            long sy = y + dy - kh / 2, sx = x + dx - kw / 2;
            if (circular) {
              sy = ((sy % h) + h) % h;
              sx = ((sx % w) + w) % w;
            } else if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
              continue;
            }
            for (long i = 0; i < ci; ++i)
              acc += in.at(std::size_t(sy), std::size_t(sx), std::size_t(i)) *
                     ker.at(std::size_t(dy), std::size_t(dx), std::size_t(i), std::size_t(o));
          }
        out.at(std::size_t(y), std::size_t(x), std::size_t(o)) = acc;
      }
  return out;
}

// K(i)[p, c_i, c_0] = sum over offsets p_1 + ... + p_i = p and channels
// c_1..c_{i-1} of G1[p_1, c_1, c_0] G2[p_2, c_2, c_1] ... Gi[p_i, c_i, c_{i-1}],
// enumerated directly.
template <typename T>
Tensor<T> composed_kernel(const std::vector<Tensor<T>>& g, std::size_t i) {
  const std::size_t k = g[0].dim(0), ext = i * (k - 1) + 1;
  const std::size_t c_last = g[i - 1].dim(2), c0 = g[0].dim(3);
  Tensor<T> out({ext, ext, c_last, c0});
  std::vector<std::size_t> py(i), px(i), ch(i + 1);
  // Recursive walk over factor j's offset and input channel.
  std::function<void(std::size_t, std::size_t, std::size_t, T)> walk =
      [&](std::size_t j, std::size_t oy, std::size_t ox, T prod) {
        if (j == i) {
          out.at(oy, ox, ch[i], ch[0]) += prod;
          return;
        }
        const Tensor<T>& f = g[j];
        for (std::size_t y = 0; y < k; ++y)
          for (std::size_t x = 0; x < k; ++x)
            for (std::size_t c = 0; c < f.dim(2); ++c) {
              ch[j + 1] = c;
              walk(j + 1, oy + y, ox + x, prod * f.at(y, x, c, ch[j]));
            }
      };
  for (std::size_t c = 0; c < c0; ++c) {
    ch[0] = c;
    walk(0, 0, 0, T(1));
  }
  return out;
}

// Phi = sum_i conv(H~(i), K(i)) with every K(i) built by composed_kernel.
template <typename T>
Tensor<T> ctt(const std::vector<Tensor<T>>& states, const std::vector<Tensor<T>>& g, bool circular) {
  Tensor<T> total;
  for (std::size_t i = 1; i <= g.size(); ++i) {
    Tensor<T> term = conv2d(states[i - 1], composed_kernel(g, i), circular);
    if (i == 1) {
      total = term;
    } else {
      for (std::size_t e = 0; e < total.size(); ++e) total[e] += term[e];
    }
  }
  return total;
}

// Dense [K, K, C_in, C_out] kernel from TT cores by summing over every rank
// index tuple for each output element. Mode index 0 is most significant.
template <typename T>
Tensor<T> tt_contract(const std::vector<Tensor<T>>& cores, const std::vector<std::size_t>& tf,
                      const std::vector<std::size_t>& sf) {
  const std::size_t n = tf.size(), k = cores[0].dim(0);
  std::size_t cin = 1, cout = 1;
  for (std::size_t i = 0; i < n; ++i) {
    cin *= sf[i];
    cout *= tf[i];
  }
  Tensor<T> w({k, k, cin, cout});
  std::vector<std::size_t> t(n), s(n);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      for (std::size_t si = 0; si < cin; ++si)
        for (std::size_t ti = 0; ti < cout; ++ti) {
          std::size_t rs = si, rt = ti;
          for (std::size_t m = n; m-- > 0;) {
            s[m] = rs % sf[m];
            rs /= sf[m];
            t[m] = rt % tf[m];
            rt /= tf[m];
          }
          // Sum over (r0, ..., r_{n-1}) recursively.
          std::function<T(std::size_t, std::size_t)> chain = [&](std::size_t m, std::size_t r) -> T {
            const Tensor<T>& c = cores[m + 1];
            if (m + 1 == n) return c.at(t[m], s[m], r);
            T acc = 0;
            for (std::size_t r2 = 0; r2 < c.dim(3); ++r2) acc += c.at(t[m], s[m], r, r2) * chain(m + 1, r2);
            return acc;
          };
          T acc = 0;
          for (std::size_t r0 = 0; r0 < cores[0].dim(2); ++r0) acc += cores[0].at(a, b, r0) * chain(0, r0);
          w.at(a, b, si, ti) = acc;
        }
  return w;
}

struct LstmResult {
  Tensor<double> hidden, cell;
};

// One ConvLSTM step from its defining equations with per-element loops.
inline LstmResult conv_lstm_step(const Tensor<double>& x, const Tensor<double>& h,
                                 const Tensor<double>& c, const Tensor<double>& w,
                                 const Tensor<double>& k, const Tensor<double>* bias) {
  const Tensor<double> zx = conv2d(x, w, false), zh = conv2d(h, k, false);
  const std::size_t H = c.dim(0), W = c.dim(1), C = c.dim(2);
  LstmResult r{Tensor<double>({H, W, C}), Tensor<double>({H, W, C})};
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t xx = 0; xx < W; ++xx)
      for (std::size_t ch = 0; ch < C; ++ch) {
        auto pre = [&](std::size_t gate) {
          const std::size_t o = gate * C + ch;
          return zx.at(y, xx, o) + zh.at(y, xx, o) + (bias ? (*bias)[o] : 0.0);
        };
        const double ig = sigmoid(pre(0)), fg = sigmoid(pre(1)), cand = std::tanh(pre(2)),
                     og = sigmoid(pre(3));
        const double cell = c.at(y, xx, ch) * fg + cand * ig;
        r.cell.at(y, xx, ch) = cell;
        r.hidden.at(y, xx, ch) = og * std::tanh(cell);
      }
  return r;
}

// Mean SSIM, evaluating every window as an explicit 2-D weighted sum.
inline double ssim(const Tensor<double>& a, const Tensor<double>& b, std::size_t win = 11,
                   double sigma = 1.5) {
  const std::size_t h = a.dim(0), w = a.dim(1);
  std::vector<double> g(win * win);
  double norm = 0;
  const double c = double(win / 2);
  for (std::size_t i = 0; i < win; ++i)
    for (std::size_t j = 0; j < win; ++j) {
      const double d2 = (double(i) - c) * (double(i) - c) + (double(j) - c) * (double(j) - c);
      g[i * win + j] = std::exp(-d2 / (2 * sigma * sigma));
      norm += g[i * win + j];
    }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + win <= h; ++y)
    for (std::size_t x = 0; x + win <= w; ++x) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          const double wt = g[i * win + j] / norm;
          ma += wt * a[(y + i) * w + x + j];
          mb += wt * b[(y + i) * w + x + j];
        }
      double va = 0, vb = 0, cov = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          const double wt = g[i * win + j] / norm;
          const double da = a[(y + i) * w + x + j] - ma, db = b[(y + i) * w + x + j] - mb;
          va += wt * da * da;
          vb += wt * db * db;
          cov += wt * da * db;
        }
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / double(count);
}

// Central differences of a scalar function with respect to every element of
// a parameter leaf, restoring the value afterwards.
inline Tensor<double> numeric_gradient(const std::function<double()>& f, const Var<double>& p,
                                       double eps = 1e-5) {
  Tensor<double> base = p.value(), g(base.dims());
  for (std::size_t i = 0; i < base.size(); ++i) {
    Tensor<double> probe = base;
    probe[i] = base[i] + eps;
    p.assign(probe);
    const double up = f();
    probe[i] = base[i] - eps;
    p.assign(probe);
    const double down = f();
    g[i] = (up - down) / (2 * eps);
  }
  p.assign(base);
  return g;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_relative_error(const Tensor<double>& a, const Tensor<double>& b,
                                 double floor = 1e-3) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    const double s = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, d / s);
  }
  return worst;
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace cttl::reference
