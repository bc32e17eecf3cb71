// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "cttl/analysis.hpp"
#include "cttl/cells.hpp"
#include "cttl/reference.hpp"
#include "cttl/rng.hpp"

namespace cttl {

template <typename T>
Tensor<T> transpose_spatial(const Tensor<T>& k) {
  const std::size_t kh = k.dim(0), kw = k.dim(1), ci = k.dim(2), co = k.dim(3);
  Tensor<T> out({kw, kh, ci, co});
  for (std::size_t y = 0; y < kh; ++y)
    for (std::size_t x = 0; x < kw; ++x)
      for (std::size_t i = 0; i < ci; ++i)
        for (std::size_t o = 0; o < co; ++o) out.at(x, y, i, o) = k.at(y, x, i, o);
  return out;
}

template Tensor<float> transpose_spatial(const Tensor<float>&);
template Tensor<double> transpose_spatial(const Tensor<double>&);

namespace {

Tensor<double> random_tensor(const Shape& dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(dims);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double max_abs(const Tensor<double>& t) {
  double m = 0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

template <typename T>
double rel_diff(const Tensor<T>& a, const Tensor<T>& b) {
  const Tensor<double> da = a.template cast<double>(), db = b.template cast<double>();
  const double scale = std::max(max_abs(da), 1e-300);
  return reference::max_abs_diff(da, db) / scale;
}

Tensor<double> interior(const Tensor<double>& t, std::size_t m) {
  const std::size_t h = t.dim(0), w = t.dim(1), c = t.dim(2);
  Tensor<double> out({h - 2 * m, w - 2 * m, c});
  for (std::size_t y = m; y < h - m; ++y)
    for (std::size_t x = m; x < w - m; ++x)
      for (std::size_t k = 0; k < c; ++k) out.at(y - m, x - m, k) = t.at(y, x, k);
  return out;
}

template <typename T>
Tensor<T> linear_eval(const std::vector<Tensor<T>>& states, const std::vector<Tensor<T>>& factors,
                      PadMode mode, Mutation mutation) {
  CttFactors<T> f{factors};
  if (mutation == Mutation::kTransposeKernel)
    for (auto& g : f.factors) g = transpose_spatial(g);
  return ctt_linear(std::span<const Tensor<T>>(states), f, mode);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

}  // namespace

EquivalenceReport ctt_equivalence_sweep(const std::vector<std::size_t>& orders,
                                        const std::vector<std::size_t>& ranks,
                                        const std::vector<std::size_t>& kernels,
                                        std::size_t instances, std::size_t size,
                                        std::uint64_t seed, Mutation mutation) {
  EquivalenceReport r;
  for (std::size_t n : orders)
    for (std::size_t rank : ranks)
      for (std::size_t k : kernels)
        for (std::size_t inst = 0; inst < instances; ++inst) {
          Rng rng = Rng::derive(seed, {n, rank, k, inst});
          CttShape shape{k, std::vector<std::size_t>(n + 1, rank)};
          const auto f = CttFactors<double>::random(shape, rng.next_u64());
          const std::size_t margin = n * (k - 1) / 2;
          const std::size_t zsize = std::max(size, 2 * margin + 2);
          std::vector<Tensor<double>> states, zstates;
          for (std::size_t i = 1; i <= n; ++i) {
            states.push_back(random_tensor({size, size, rank}, rng));
            zstates.push_back(random_tensor({zsize, zsize, rank}, rng));
          }
          const auto sd = std::span<const Tensor<double>>(states);
          const Tensor<double> naive = ctt_naive(sd, f, PadMode::kCircularSame);
          const Tensor<double> lin = linear_eval(states, f.factors, PadMode::kCircularSame, mutation);
          r.circular_double = std::max(r.circular_double, rel_diff(naive, lin));

          std::vector<Tensor<float>> fs, ss;
          for (const auto& g : f.factors) fs.push_back(g.cast<float>());
          for (const auto& s : states) ss.push_back(s.cast<float>());
          const Tensor<float> naive_f =
              ctt_naive(std::span<const Tensor<float>>(ss), CttFactors<float>{fs}, PadMode::kCircularSame);
          const Tensor<float> lin_f = linear_eval(ss, fs, PadMode::kCircularSame, mutation);
          r.circular_single = std::max(r.circular_single, rel_diff(naive_f, lin_f));

          const Tensor<double> zn =
              ctt_naive(std::span<const Tensor<double>>(zstates), f, PadMode::kZeroSame);
          const Tensor<double> zl = linear_eval(zstates, f.factors, PadMode::kZeroSame, mutation);
          r.interior_double = std::max(r.interior_double, rel_diff(interior(zn, margin), interior(zl, margin)));
          ++r.instances;
        }
  return r;
}

double gradient_check(const std::function<Var<double>()>& loss, const std::vector<Var<double>>& params,
                      double eps) {
  Tape<double> tape;
  std::vector<Tensor<double>> analytic;
  {
    Tape<double>::Scope scope(tape);
    for (const auto& p : params) tape.watch(p);
    const Var<double> root = loss();
    tape.backward(root);
    for (const auto& p : params) analytic.push_back(tape.grad(p));
  }
  double worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor<double> numeric =
        reference::numeric_gradient([&] { return loss().value()[0]; }, params[k], eps);
    worst = std::max(worst, reference::max_relative_error(analytic[k], numeric));
  }
  return worst;
}

std::vector<CheckResult> run_verify(const VerifyOptions& opts,
                                    const std::function<void(const CheckResult&)>& on_result) {
  std::vector<CheckResult> results;
  auto run = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    r.name = name;
    try {
      auto [ok, detail] = body();
      r.passed = ok;
      r.detail = std::move(detail);
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  };
  Rng rng(opts.seed);

  run("conv2d matches scalar oracle", [&] {
    double worst = 0;
    for (PadMode mode : {PadMode::kZeroSame, PadMode::kCircularSame}) {
      const auto x = random_tensor({7, 7, 2}, rng), k = random_tensor({3, 3, 2, 3}, rng);
      const auto d = reference::max_abs_diff(conv2d(x, k, mode),
                                             reference::conv2d(x, k, mode == PadMode::kCircularSame));
      worst = std::max(worst, d);
    }
    return std::pair{worst <= 1e-12, fmt("max abs diff %.3g (tol 1e-12)", worst)};
  });

  run("kernel composition equals sequential convolution (circular)", [&] {
    double worst = 0;
    for (std::size_t ka : {1, 3, 5, 7})
      for (std::size_t kb : {1, 3, 5, 7}) {
        const std::size_t h = 4 + rng.below(9), w = 4 + rng.below(9);
        const auto x = random_tensor({h, w, 2}, rng);
        const auto a = random_tensor({ka, ka, 3, 2}, rng), b = random_tensor({kb, kb, 2, 3}, rng);
        const auto seq = conv2d(conv2d(x, b, PadMode::kCircularSame), a, PadMode::kCircularSame);
        const auto once = conv2d(x, compose_kernels(a, b), PadMode::kCircularSame);
        worst = std::max(worst, reference::max_abs_diff(seq, once));
      }
    return std::pair{worst <= 1e-10, fmt("max abs diff %.3g (tol 1e-10)", worst)};
  });

  run("reconstruct_kernel matches direct composition sum", [&] {
    CttShape shape{3, {4, 3, 2, 3}};
    const auto f = CttFactors<double>::random(shape, rng.next_u64());
    double worst = 0;
    for (std::size_t i = 1; i <= 3; ++i)
      worst = std::max(worst, reference::max_abs_diff(reconstruct_kernel(f, i),
                                                      reference::composed_kernel(f.factors, i)));
    return std::pair{worst <= 1e-10, fmt("max abs diff %.3g (tol 1e-10)", worst)};
  });

  run("ctt_naive == ctt_linear sweep", [&] {
    const auto r = ctt_equivalence_sweep({1, 2, 3, 5}, {4, 8, 16}, {3, 5}, opts.quick ? 1 : 20, 12,
                                         rng.next_u64(), opts.mutation);
    const bool ok = r.circular_double <= 1e-10 && r.circular_single <= 1e-4 && r.interior_double <= 1e-10;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "%zu instances; circular double %.3g, single %.3g; zero-pad interior %.3g",
                  r.instances, r.circular_double, r.circular_single, r.interior_double);
    return std::pair{ok, std::string(buf)};
  });

  run("tensor primitive gradients", [&] {
    auto p = [&](Shape d) { return Var<double>::parameter(random_tensor(d, rng, 0.1, 1.0)); };
    auto weights = [&](Shape d) { return Var<double>::constant(random_tensor(d, rng)); };
    double worst = 0;
    const auto a = p({4, 4, 2}), b = p({4, 4, 2}), r2 = weights({4, 4, 2});
    worst = std::max(worst, gradient_check([&] { return sum(mul(add(a, b), r2)); }, {a, b}));
    worst = std::max(worst, gradient_check([&] { return sum(mul(sub(a, b), r2)); }, {a, b}));
    worst = std::max(worst, gradient_check([&] { return sum(mul(mul(a, b), r2)); }, {a, b}));
    worst = std::max(worst, gradient_check([&] { return sum(mul(scale(a, 1.7), r2)); }, {a}));
    worst = std::max(worst, gradient_check([&] { return sum(mul(sigmoid(a), r2)); }, {a}));
    worst = std::max(worst, gradient_check([&] { return sum(mul(tanh(a), r2)); }, {a}));
    worst = std::max(worst, gradient_check([&] { return sum(mul(abs(a), r2)); }, {a}));
    const auto k = p({3, 3, 2, 3}), r3 = weights({4, 4, 3});
    for (PadMode mode : {PadMode::kZeroSame, PadMode::kCircularSame})
      worst = std::max(worst,
                       gradient_check([&] { return sum(mul(sigmoid(conv2d(a, k, mode)), r3)); }, {a, k}));
    const auto bias = p({2});
    worst = std::max(worst, gradient_check([&] { return sum(mul(add_channel_bias(a, bias), r2)); }, {a, bias}));
    const auto r4 = weights({4, 4, 4});
    worst = std::max(worst, gradient_check(
                                [&] {
                                  const std::vector<Var<double>> parts{a, b};
                                  return sum(mul(concat_channels(std::span<const Var<double>>(parts)), r4));
                                },
                                {a, b}));
    const auto r1 = weights({4, 4, 1});
    worst = std::max(worst, gradient_check([&] { return sum(mul(slice_channels(a, 1, 1), r1)); }, {a}));
    const auto ka = p({3, 3, 2, 3}), kb = p({3, 3, 3, 2}), rk = weights({5, 5, 3, 3});
    worst = std::max(worst, gradient_check([&] { return sum(mul(compose_kernels(ka, kb), rk)); }, {ka, kb}));
    return std::pair{worst < 1e-4, fmt("max relative error %.3g (tol 1e-4)", worst)};
  });

  run("ctt_linear gradients", [&] {
    CttShape shape{3, {4, 3, 2, 3}};
    const auto f = CttFactors<double>::random(shape, rng.next_u64());
    std::vector<Var<double>> factors, states, all;
    for (const auto& g : f.factors) factors.push_back(Var<double>::parameter(g));
    for (std::size_t i = 1; i <= 3; ++i)
      states.push_back(Var<double>::parameter(random_tensor({5, 5, shape.ranks[i]}, rng)));
    all = factors;
    all.insert(all.end(), states.begin(), states.end());
    const auto w = Var<double>::constant(random_tensor({5, 5, 4}, rng));
    const double worst = gradient_check(
        [&] {
          return sum(mul(tanh(ctt_linear(std::span<const Var<double>>(states),
                                         std::span<const Var<double>>(factors), PadMode::kZeroSame)),
                         w));
        },
        all);
    return std::pair{worst < 1e-4, fmt("max relative error %.3g (tol 1e-4)", worst)};
  });

  run("TT kernel matches brute-force contraction", [&] {
    TtShape s{3, {2, 3}, {3, 2}, {2, 3}};
    const auto k = TtCompressedKernel<double>::random(s, rng.next_u64());
    const double d = reference::max_abs_diff(tt_reconstruct_w(k),
                                             reference::tt_contract(k.factors, s.out_factors, s.in_factors));
    return std::pair{d <= 1e-10, fmt("max abs diff %.3g (tol 1e-10)", d)};
  });

  run("first-order Conv-TT-LSTM degenerates to ConvLSTM", [&] {
    CellSpec spec;
    spec.kind = CellKind::kConvTtLstm;
    spec.in_channels = 2;
    spec.out_channels = 3;
    spec.kernel = 3;
    spec.order = 1;
    spec.steps = 1;
    spec.ranks = {3};
    const auto cell = Cell<double>::build(spec, rng.next_u64());
    auto tt = cell.conv_tt_lstm_params();
    Tensor<double> id({3, 3, 3, 3});
    for (std::size_t c = 0; c < 3; ++c) id.at(1, 1, c, c) = 1.0;
    tt.preprocess[0].assign(id);
    const ConvLstmParams<double> base{tt.w, tt.factors[0], tt.bias};
    CellState<double> s1 = CellState<double>::zeros(6, 6, 3, 1), s2 = s1;
    const std::size_t steps = opts.quick ? 10 : 50;
    for (std::size_t t = 0; t < steps; ++t) {
      const auto x = Var<double>::constant(random_tensor({6, 6, 2}, rng));
      auto r1 = conv_lstm_step(x, s1, base, spec.options);
      auto r2 = conv_tt_lstm_step(x, s2, tt, spec.window, spec.algorithm, spec.options);
      if (!(r1.hidden.value() == r2.hidden.value()) || !(r1.state.cell.value() == r2.state.cell.value()))
        return std::pair{false, "outputs differ at step " + std::to_string(t)};
      s1 = r1.state;
      s2 = r2.state;
    }
    return std::pair{true, std::to_string(steps) + " steps bit-identical"};
  });

  run("SSIM and PSNR oracles", [&] {
    const auto x = random_tensor({16, 16}, rng, 0.0, 1.0);
    if (ssim(x, x) != 1.0) return std::pair{false, std::string("ssim(x, x) != 1")};
    const auto off = random_tensor({16, 16}, rng, 0.0, 0.9);
    Tensor<double> shifted = off;
    for (auto& v : shifted.data()) v += 0.1;
    const double p = psnr(off, shifted);
    if (std::abs(p - 20.0) > 1e-9) return std::pair{false, fmt("psnr offset 0.1 = %.12g", p)};
    double worst = 0, asym = 0;
    for (int i = 0; i < 10; ++i) {
      const auto a = random_tensor({16, 16}, rng, 0.0, 1.0), b = random_tensor({16, 16}, rng, 0.0, 1.0);
      worst = std::max(worst, std::abs(ssim(a, b) - reference::ssim(a, b)));
      asym = std::max(asym, std::abs(ssim(a, b) - ssim(b, a)));
    }
    const bool ok = worst <= 1e-8 && asym <= 1e-12;
    char buf[128];
    std::snprintf(buf, sizeof buf, "oracle diff %.3g (tol 1e-8), asymmetry %.3g (tol 1e-12)", worst, asym);
    return std::pair{ok, std::string(buf)};
  });

  return results;
}

}  // namespace cttl
