// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace cttl {

template <typename T>
double mse(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target))
    throw ShapeError("mse: " + shape_str(pred.dims()) + " vs " + shape_str(target.dims()));
  if (pred.size() == 0) throw ShapeError("mse: empty tensors");
  double s = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = double(pred[i]) - double(target[i]);
    s += d * d;
  }
  return s / double(pred.size());
}

double psnr_from_mse(double m) {
  if (m == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target) {
  return psnr_from_mse(mse(pred, target));
}

std::vector<double> gaussian_window(const SsimConfig& cfg) {
  if (cfg.window == 0 || cfg.window % 2 == 0) throw ConfigError("ssim: window must be odd");
  std::vector<double> w(cfg.window);
  const double c = double(cfg.window / 2);
  double total = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = double(i) - c;
    w[i] = std::exp(-d * d / (2 * cfg.sigma * cfg.sigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

namespace {

// Valid-region separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& x, std::size_t h, std::size_t w,
                                 const std::vector<double>& g) {
  const std::size_t k = g.size(), oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x0 = 0; x0 < ow; ++x0) {
      double s = 0;
      for (std::size_t j = 0; j < k; ++j) s += g[j] * x[y * w + x0 + j];
      rows[y * ow + x0] = s;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y0 = 0; y0 < oh; ++y0)
    for (std::size_t x0 = 0; x0 < ow; ++x0) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += g[i] * rows[(y0 + i) * ow + x0];
      out[y0 * ow + x0] = s;
    }
  return out;
}

std::pair<std::size_t, std::size_t> plane_dims(const Shape& d) {
  if (d.size() == 2) return {d[0], d[1]};
  if (d.size() == 3 && d[2] == 1) return {d[0], d[1]};
  throw ShapeError("ssim: expected a single-channel frame, got " + shape_str(d));
}

}  // namespace

template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimConfig& cfg) {
  if (!a.same_shape(b)) throw ShapeError("ssim: " + shape_str(a.dims()) + " vs " + shape_str(b.dims()));
  const auto [h, w] = plane_dims(a.dims());
  if (h < cfg.window || w < cfg.window)
    throw ShapeError("ssim: frame " + std::to_string(h) + "x" + std::to_string(w) +
                     " is smaller than the " + std::to_string(cfg.window) + "x" +
                     std::to_string(cfg.window) + " window");
  const auto g = gaussian_window(cfg);
  const std::size_t n = h * w;
  std::vector<double> xa(n), xb(n), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    xa[i] = double(a[i]);
    xb[i] = double(b[i]);
    aa[i] = xa[i] * xa[i];
    bb[i] = xb[i] * xb[i];
    ab[i] = xa[i] * xb[i];
  }
  const auto ma = filter_valid(xa, h, w, g), mb = filter_valid(xb, h, w, g);
  const auto faa = filter_valid(aa, h, w, g), fbb = filter_valid(bb, h, w, g);
  const auto fab = filter_valid(ab, h, w, g);
  const double c1 = cfg.c1(), c2 = cfg.c2();
  double total = 0;
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const double saa = faa[i] - ma[i] * ma[i];
    const double sbb = fbb[i] - mb[i] * mb[i];
    const double sab = fab[i] - ma[i] * mb[i];
    const double num = (2 * ma[i] * mb[i] + c1) * (2 * sab + c2);
    const double den = (ma[i] * ma[i] + mb[i] * mb[i] + c1) * (saa + sbb + c2);
    total += num / den;
  }
  return total / double(ma.size());
}

// ---------------------------------------------------------------------------

std::size_t CostReport::total_params() const {
  std::size_t t = 0;
  for (const auto& l : layers) t += l.params;
  return t;
}

std::uint64_t CostReport::total_flops() const {
  std::uint64_t t = 0;
  for (const auto& l : layers) t += l.flops;
  return t;
}

std::string CostReport::to_text() const {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-10s %14s %18s\n", "layer", "params", "flops/frame");
  out += buf;
  for (const auto& l : layers) {
    std::snprintf(buf, sizeof buf, "%-10s %14zu %18llu\n", l.name.c_str(), l.params,
                  static_cast<unsigned long long>(l.flops));
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-10s %14zu %18llu\n", "total", total_params(),
                static_cast<unsigned long long>(total_flops()));
  out += buf;
  return out;
}

std::string CostReport::to_csv() const {
  std::string out = "layer,params,flops\n";
  for (const auto& l : layers)
    out += l.name + "," + std::to_string(l.params) + "," + std::to_string(l.flops) + "\n";
  out += "total," + std::to_string(total_params()) + "," + std::to_string(total_flops()) + "\n";
  return out;
}

std::uint64_t ctt_flops(const CttShape& s, std::size_t h, std::size_t w, CttAlgorithm alg) {
  const std::uint64_t hw = std::uint64_t(h) * w, k2 = std::uint64_t(s.kernel) * s.kernel;
  const std::size_t n = s.order();
  const auto& c = s.ranks;
  std::uint64_t f = 0;
  if (alg == CttAlgorithm::kLinear) {
    for (std::size_t i = 1; i <= n; ++i) f += 2 * k2 * c[i] * c[i - 1] * hw;
    for (std::size_t i = 1; i < n; ++i) f += c[i] * hw;
    return f;
  }
  f += 2 * k2 * c[1] * c[0] * hw;
  for (std::size_t i = 2; i <= n; ++i) {
    const std::uint64_t prev = s.composed_extent(i - 1), cur = s.composed_extent(i);
    f += 2 * prev * prev * k2 * c[i] * c[i - 1] * c[0];
    f += 2 * cur * cur * c[i] * c[0] * hw;
    f += c[0] * hw;
  }
  return f;
}

namespace {

std::size_t layer_params(const CellSpec& s) {
  const std::size_t k2 = s.kernel * s.kernel, c = s.out_channels, bias = s.bias ? 4 * c : 0;
  switch (s.kind) {
    case CellKind::kConvLstm:
      return k2 * (s.in_channels + c) * 4 * c + bias;
    case CellKind::kConvTtLstm: {
      std::size_t p = k2 * s.in_channels * 4 * c + bias;
      const CttShape shape = s.ctt_shape();
      for (std::size_t i = 1; i <= s.order; ++i)
        p += k2 * s.preprocess_channels() * shape.ranks[i] + (s.bias ? shape.ranks[i] : 0);
      return p + shape.parameter_count();
    }
    case CellKind::kTtConvLstm:
      return s.tt.parameter_count() + k2 * c * 4 * c + bias;
  }
  return 0;
}

std::uint64_t layer_flops(const CellSpec& s, std::uint64_t hw) {
  const std::uint64_t k2 = s.kernel * s.kernel, c = s.out_channels;
  const std::uint64_t lstm = (4 + (s.options.legacy_cell_update ? 2 : 3) + 2) * c * hw;
  const std::uint64_t bias = s.bias ? 4 * c * hw : 0;
  const std::uint64_t input_path = 2 * k2 * s.in_channels * 4 * c * hw;
  switch (s.kind) {
    case CellKind::kConvLstm:
    case CellKind::kTtConvLstm:
      return input_path + 2 * k2 * c * 4 * c * hw + 4 * c * hw + bias + lstm;
    case CellKind::kConvTtLstm: {
      const CttShape shape = s.ctt_shape();
      std::uint64_t f = input_path + 4 * c * hw + bias + lstm;
      for (std::size_t i = 1; i <= s.order; ++i)
        f += 2 * k2 * s.preprocess_channels() * shape.ranks[i] * hw + (s.bias ? shape.ranks[i] * hw : 0);
      return f + ctt_flops(shape, 1, hw, s.algorithm);
    }
  }
  return 0;
}

}  // namespace

CostReport analyze(const PredictorConfig& cfg, std::size_t h, std::size_t w) {
  cfg.validate();
  const std::uint64_t hw = std::uint64_t(h) * w;
  CostReport r;
  const auto specs = cfg.cell_specs();
  for (std::size_t l = 0; l < specs.size(); ++l)
    r.layers.push_back({"layer" + std::to_string(l + 1), layer_params(specs[l]), layer_flops(specs[l], hw)});
  const std::uint64_t c = cfg.channels.back(), out = cfg.input_channels;
  r.layers.push_back({"head", std::size_t(c * out + out),
                      2 * c * out * hw + out * hw + (cfg.head_sigmoid ? out * hw : 0)});
  return r;
}

CostReport count_params(const PredictorConfig& cfg) {
  CostReport r = analyze(cfg, 0, 0);
  for (auto& l : r.layers) l.flops = 0;
  return r;
}

CostReport count_flops(const PredictorConfig& cfg, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw ConfigError("count_flops: frame dimensions must be positive");
  return analyze(cfg, h, w);
}

#define CTTL_INSTANTIATE_METRICS(T)                                  \
  template double mse(const Tensor<T>&, const Tensor<T>&);           \
  template double psnr(const Tensor<T>&, const Tensor<T>&);          \
  template double ssim(const Tensor<T>&, const Tensor<T>&, const SsimConfig&);

CTTL_INSTANTIATE_METRICS(float)
CTTL_INSTANTIATE_METRICS(double)

}  // namespace cttl
