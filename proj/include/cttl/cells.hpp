// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Recurrent cells: ConvLSTM, Conv-TT-LSTM and the TT-compressed ConvLSTM.
// Gate pre-activations are laid out along channels in the order [I, F, C~, O],
// C_out channels each.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cttl/autodiff.hpp"
#include "cttl/ctt.hpp"

namespace cttl {

enum class CellKind { kConvLstm, kConvTtLstm, kTtConvLstm };
enum class WindowMode { kSliding, kFixed };

struct CellOptions {
  PadMode pad = PadMode::kZeroSame;
  // C(t) = C(t-1) + C~ o I, bypassing the forget gate.
  bool legacy_cell_update = false;
  // H(t) = O o sigmoid(C(t)) instead of O o tanh(C(t)).
  bool sigmoid_output = false;

  friend bool operator==(const CellOptions&, const CellOptions&) = default;
};

template <typename T>
struct CellState {
  Var<T> cell;                  // C(t-1)
  std::vector<Var<T>> history;  // H(t-1), H(t-2), ..., newest first

  static CellState zeros(std::size_t h, std::size_t w, std::size_t channels,
                         std::size_t history_length);
};

template <typename T>
struct StepResult {
  Var<T> hidden;
  CellState<T> state;
};

template <typename T>
struct ConvLstmParams {
  Var<T> w;     // [K, K, C_in, 4 C_out]
  Var<T> k;     // [K, K, C_out, 4 C_out]
  Var<T> bias;  // [4 C_out] or empty
};

template <typename T>
struct ConvTtLstmParams {
  Var<T> w;                             // [K, K, C_in, 4 C_out]
  Var<T> bias;                          // [4 C_out] or empty
  std::vector<Var<T>> preprocess;       // P(i): [K, K, D C_out or M C_out, C(i)]
  std::vector<Var<T>> preprocess_bias;  // [C(i)] each, or empty
  std::vector<Var<T>> factors;          // G(i): [K, K, C(i), C(i-1)]
  std::size_t steps = 1;                // M
};

template <typename T>
struct TtConvLstmParams {
  TtShape tt;                    // compresses W
  std::vector<Var<T>> w_factors;
  Var<T> k;
  Var<T> bias;
};

// Shared gate nonlinearity and state update from pre-activations [h, w, 4 C_out].
// Returns H(t); writes C(t) to *cell_out.
template <typename T>
Var<T> lstm_update(const Var<T>& gates, const Var<T>& cell_prev, const CellOptions& opts,
                   Var<T>* cell_out);

// H~(i) from the history. Sliding reads the D = M - N + 1 consecutive states
// starting at lag i; Fixed reads all M states for every i.
template <typename T>
Var<T> preprocess(std::span<const Var<T>> history, const ConvTtLstmParams<T>& params,
                  std::size_t i, WindowMode mode, PadMode pad);

template <typename T>
StepResult<T> conv_lstm_step(const Var<T>& x, const CellState<T>& state,
                             const ConvLstmParams<T>& params, const CellOptions& opts);

template <typename T>
StepResult<T> conv_tt_lstm_step(const Var<T>& x, const CellState<T>& state,
                                const ConvTtLstmParams<T>& params, WindowMode mode,
                                CttAlgorithm alg, const CellOptions& opts);

template <typename T>
StepResult<T> tt_conv_lstm_step(const Var<T>& x, const CellState<T>& state,
                                const TtConvLstmParams<T>& params, const CellOptions& opts);

// Static description of one recurrent layer.
struct CellSpec {
  CellKind kind = CellKind::kConvLstm;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  bool bias = true;
  bool forget_bias_one = false;
  CellOptions options;
  // Conv-TT-LSTM
  std::size_t order = 1;            // N
  std::size_t steps = 1;            // M
  std::vector<std::size_t> ranks;   // C(1)..C(N)
  WindowMode window = WindowMode::kSliding;
  CttAlgorithm algorithm = CttAlgorithm::kLinear;
  // TT-ConvLSTM
  TtShape tt;

  std::size_t history_length() const { return kind == CellKind::kConvTtLstm ? steps : 1; }
  // Input channels of each preprocessing kernel.
  std::size_t preprocess_channels() const;
  // C(0), ..., C(N) with C(0) = 4 C_out.
  CttShape ctt_shape() const;
  // Throws ConfigError on inconsistent hyperparameters.
  void validate() const;
};

// A cell with its parameter leaves. Parameters are listed in a fixed order
// with stable names; that order defines checkpoints and optimizer state.
template <typename T>
class Cell {
 public:
  static Cell build(const CellSpec& spec, std::uint64_t seed);

  const CellSpec& spec() const noexcept { return spec_; }
  std::span<const Var<T>> parameters() const noexcept { return params_; }
  const std::vector<std::string>& parameter_names() const noexcept { return names_; }
  std::size_t parameter_count() const;

  CellState<T> initial_state(std::size_t h, std::size_t w) const;
  StepResult<T> step(const Var<T>& x, const CellState<T>& state) const;

  ConvLstmParams<T> conv_lstm_params() const;
  ConvTtLstmParams<T> conv_tt_lstm_params() const;
  TtConvLstmParams<T> tt_conv_lstm_params() const;

 private:
  void add(std::string name, Tensor<T> value);
  const Var<T>& get(const std::string& name) const;
  Var<T> maybe(const std::string& name) const;

  CellSpec spec_;
  std::vector<Var<T>> params_;
  std::vector<std::string> names_;
};

}  // namespace cttl
