// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Stacked recurrent video predictor with channel-concatenation skips and a
// 1x1 convolutional output head.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cttl/cells.hpp"
#include "cttl/rng.hpp"

namespace cttl {

// (source, target) layer numbers, 1-based. The target layer reads the
// concatenation of the previous layer's output and the source's output at the
// same time step.
using Skip = std::pair<std::size_t, std::size_t>;

struct PredictorConfig {
  CellKind kind = CellKind::kConvTtLstm;
  std::size_t input_channels = 1;
  std::vector<std::size_t> channels{8};  // C_out per layer
  std::vector<Skip> skips;
  std::size_t kernel = 5;
  bool bias = true;
  bool forget_bias_one = false;
  CellOptions options;
  // Conv-TT-LSTM
  std::size_t order = 3;
  std::size_t steps = 3;
  std::vector<std::size_t> ranks{8};  // one entry broadcasts to every factor
  WindowMode window = WindowMode::kSliding;
  CttAlgorithm algorithm = CttAlgorithm::kLinear;
  // TT-ConvLSTM: number of channel factors and their common rank
  std::size_t tt_order = 2;
  std::size_t tt_rank = 8;
  // head
  bool head_sigmoid = false;

  std::size_t layers() const { return channels.size(); }
  // Input channels of layer l (1-based) after skip concatenation.
  std::size_t layer_input_channels(std::size_t l) const;
  std::vector<CellSpec> cell_specs() const;
  // Throws ConfigError on broken wiring or hyperparameters.
  void validate() const;

  friend bool operator==(const PredictorConfig&, const PredictorConfig&) = default;
};

// The 12-layer stack: 3 x 32, 6 x 48, 3 x 32 channels with skips 3->9 and
// 6->12, K = 5, order 3, rank 8.
PredictorConfig twelve_layer_config(CellKind kind, std::size_t steps = 3,
                                     WindowMode window = WindowMode::kSliding);
// The 4-layer ablation stack: 4 x 128 channels, no skips.
PredictorConfig four_layer_config(CellKind kind, std::size_t steps = 3,
                                  WindowMode window = WindowMode::kSliding);

struct RolloutPlan {
  std::size_t context_len = 10;
  std::size_t horizon = 10;
  // Probability of feeding the ground-truth frame instead of the previous
  // prediction at each step after the context. Sampled independently per step.
  double teacher_ratio = 0.0;

  void validate() const;
};

// A predictor owns handles to its parameters and its recurrent states.
// Copies share parameter leaves and carry independent states, so a copy is a
// cheap clone for per-sample rollouts.
template <typename T>
class Predictor {
 public:
  static Predictor build(const PredictorConfig& config, std::uint64_t seed);

  const PredictorConfig& config() const noexcept { return config_; }
  const std::vector<Cell<T>>& cells() const noexcept { return cells_; }
  std::vector<Var<T>> parameters() const;
  std::vector<std::string> parameter_names() const;
  std::size_t parameter_count() const;

  // Zeroes every state for frames of the given spatial size.
  void reset(std::size_t h, std::size_t w);
  // Consumes one frame [h, w, input_channels] and returns the predicted next
  // frame. Resets states implicitly when the frame size changes.
  Var<T> step(const Var<T>& frame);

  // Feeds context frames teacher-forced, then predicts `horizon` frames.
  // `frames` holds at least context_len frames, and context_len + horizon - 1
  // when teacher_ratio > 0. Outputs[k] predicts frames[context_len + k].
  // States are reset at the start and left mutated at the end.
  std::vector<Var<T>> rollout(std::span<const Var<T>> frames, const RolloutPlan& plan,
                              Rng* rng = nullptr);

 private:
  PredictorConfig config_;
  std::vector<Cell<T>> cells_;
  Var<T> head_w_;
  Var<T> head_b_;
  std::vector<CellState<T>> states_;
  std::size_t h_ = 0;
  std::size_t w_ = 0;
};

}  // namespace cttl
