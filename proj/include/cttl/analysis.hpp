// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Frame quality metrics and static cost accounting.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cttl/ctt.hpp"
#include "cttl/predictor.hpp"
#include "cttl/tensor.hpp"

namespace cttl {

template <typename T>
double mse(const Tensor<T>& pred, const Tensor<T>& target);
// 10 log10(1 / mse) for data in [0, 1]; +infinity when mse is 0.
template <typename T>
double psnr(const Tensor<T>& pred, const Tensor<T>& target);
double psnr_from_mse(double mse);

struct SsimConfig {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;

  double c1() const { return (k1 * range) * (k1 * range); }
  double c2() const { return (k2 * range) * (k2 * range); }
};

// Normalized separable Gaussian taps of length cfg.window.
std::vector<double> gaussian_window(const SsimConfig& cfg);

// Mean SSIM over every fully contained Gaussian window of two single-channel
// [h, w] or [h, w, 1] frames.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, const SsimConfig& cfg = {});

struct LayerCost {
  std::string name;
  std::size_t params = 0;
  std::uint64_t flops = 0;  // per frame
};

struct CostReport {
  std::vector<LayerCost> layers;

  std::size_t total_params() const;
  std::uint64_t total_flops() const;
  std::string to_text() const;
  std::string to_csv() const;
};

// FLOPs of one CTT evaluation on h x w maps, matching the instrumented kernels.
std::uint64_t ctt_flops(const CttShape& shape, std::size_t h, std::size_t w, CttAlgorithm alg);

// Per-layer parameter counts from the closed forms.
CostReport count_params(const PredictorConfig& cfg);
// Per-frame forward FLOPs (multiply-accumulate = 2) including gate
// elementwise work at 1 FLOP per element. The TT-ConvLSTM kernel
// reconstruction is excluded since it is independent of the frame.
CostReport count_flops(const PredictorConfig& cfg, std::size_t h, std::size_t w);
// Both counts in one report.
CostReport analyze(const PredictorConfig& cfg, std::size_t h, std::size_t w);

}  // namespace cttl
