// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/cells.hpp"

#include <algorithm>
#include <string>

#include "cttl/rng.hpp"

namespace cttl {

template <typename T>
CellState<T> CellState<T>::zeros(std::size_t h, std::size_t w, std::size_t channels,
                                 std::size_t history_length) {
  CellState s;
  s.cell = Var<T>::constant(Tensor<T>({h, w, channels}));
  s.history.assign(history_length, Var<T>::constant(Tensor<T>({h, w, channels})));
  return s;
}

template <typename T>
Var<T> lstm_update(const Var<T>& gates, const Var<T>& cell_prev, const CellOptions& opts,
                   Var<T>* cell_out) {
  const Shape& d = gates.dims();
  if (d.size() != 3 || d[2] % 4 != 0)
    throw ShapeError("lstm_update: gate tensor must have 4 C_out channels, got " + shape_str(d));
  const std::size_t c = d[2] / 4;
  if (cell_prev.dims() != Shape{d[0], d[1], c})
    throw ShapeError("lstm_update: cell state " + shape_str(cell_prev.dims()) +
                     " does not match gates " + shape_str(d));
  const Var<T> in_gate = sigmoid(slice_channels(gates, 0, c));
  const Var<T> forget_gate = sigmoid(slice_channels(gates, c, c));
  const Var<T> candidate = tanh(slice_channels(gates, 2 * c, c));
  const Var<T> out_gate = sigmoid(slice_channels(gates, 3 * c, c));
  Var<T> cell = opts.legacy_cell_update
                    ? add(cell_prev, mul(candidate, in_gate))
                    : add(mul(cell_prev, forget_gate), mul(candidate, in_gate));
  Var<T> hidden = mul(out_gate, opts.sigmoid_output ? sigmoid(cell) : tanh(cell));
  *cell_out = std::move(cell);
  return hidden;
}

namespace {

template <typename T>
CellState<T> advance(const CellState<T>& old, Var<T> hidden, Var<T> cell) {
  CellState<T> next;
  next.cell = std::move(cell);
  next.history.reserve(old.history.size());
  next.history.push_back(std::move(hidden));
  for (std::size_t i = 0; i + 1 < old.history.size(); ++i) next.history.push_back(old.history[i]);
  return next;
}

template <typename T>
Var<T> with_bias(Var<T> x, const Var<T>& bias) {
  return bias ? add_channel_bias(x, bias) : x;
}

template <typename T>
void require_history(const CellState<T>& state, std::size_t m) {
  if (state.history.size() != m)
    throw ShapeError("cell state holds " + std::to_string(state.history.size()) +
                     " hidden states, expected " + std::to_string(m));
  if (!state.cell) throw ShapeError("cell state is uninitialized");
}

}  // namespace

template <typename T>
Var<T> preprocess(std::span<const Var<T>> history, const ConvTtLstmParams<T>& params,
                  std::size_t i, WindowMode mode, PadMode pad) {
  const std::size_t n = params.factors.size();
  const std::size_t m = params.steps;
  if (m < n) throw ConfigError("preprocess: steps M must be at least order N");
  if (i < 1 || i > n)
    throw ShapeError("preprocess: index " + std::to_string(i) + " outside 1.." +
                     std::to_string(n));
  if (history.size() != m)
    throw ShapeError("preprocess: history holds " + std::to_string(history.size()) +
                     " states, expected " + std::to_string(m));
  std::span<const Var<T>> window =
      mode == WindowMode::kSliding ? history.subspan(i - 1, m - n + 1) : history;
  Var<T> stacked = window.size() == 1 ? window[0] : concat_channels(window);
  Var<T> out = conv2d(stacked, params.preprocess[i - 1], pad);
  if (!params.preprocess_bias.empty()) out = with_bias(out, params.preprocess_bias[i - 1]);
  return out;
}

template <typename T>
StepResult<T> conv_lstm_step(const Var<T>& x, const CellState<T>& state,
                             const ConvLstmParams<T>& params, const CellOptions& opts) {
  require_history(state, 1);
  Var<T> gates = add(conv2d(x, params.w, opts.pad), conv2d(state.history[0], params.k, opts.pad));
  gates = with_bias(gates, params.bias);
  Var<T> cell;
  Var<T> hidden = lstm_update(gates, state.cell, opts, &cell);
  return {hidden, advance(state, hidden, cell)};
}

template <typename T>
StepResult<T> conv_tt_lstm_step(const Var<T>& x, const CellState<T>& state,
                                const ConvTtLstmParams<T>& params, WindowMode mode,
                                CttAlgorithm alg, const CellOptions& opts) {
  const std::size_t n = params.factors.size();
  if (params.steps < n) throw ConfigError("conv_tt_lstm_step: steps M must be at least order N");
  require_history(state, params.steps);
  std::vector<Var<T>> inputs;
  inputs.reserve(n);
  for (std::size_t i = 1; i <= n; ++i)
    inputs.push_back(preprocess(std::span<const Var<T>>(state.history), params, i, mode, opts.pad));
  Var<T> phi = ctt_apply(std::span<const Var<T>>(inputs), std::span<const Var<T>>(params.factors),
                         opts.pad, alg);
  Var<T> gates = with_bias(add(conv2d(x, params.w, opts.pad), phi), params.bias);
  Var<T> cell;
  Var<T> hidden = lstm_update(gates, state.cell, opts, &cell);
  return {hidden, advance(state, hidden, cell)};
}

template <typename T>
StepResult<T> tt_conv_lstm_step(const Var<T>& x, const CellState<T>& state,
                                const TtConvLstmParams<T>& params, const CellOptions& opts) {
  ConvLstmParams<T> dense{tt_reconstruct_w(params.tt, std::span<const Var<T>>(params.w_factors)),
                          params.k, params.bias};
  return conv_lstm_step(x, state, dense, opts);
}

// ---------------------------------------------------------------------------

std::size_t CellSpec::preprocess_channels() const {
  return (window == WindowMode::kSliding ? steps - order + 1 : steps) * out_channels;
}

CttShape CellSpec::ctt_shape() const {
  CttShape s;
  s.kernel = kernel;
  s.ranks.push_back(4 * out_channels);
  s.ranks.insert(s.ranks.end(), ranks.begin(), ranks.end());
  return s;
}

void CellSpec::validate() const {
  if (kernel == 0 || kernel % 2 == 0)
    throw ConfigError("cell: kernel size must be odd, got " + std::to_string(kernel));
  if (in_channels == 0 || out_channels == 0) throw ConfigError("cell: channel counts must be positive");
  switch (kind) {
    case CellKind::kConvLstm:
      break;
    case CellKind::kConvTtLstm:
      if (order == 0) throw ConfigError("cell: order N must be positive");
      if (steps < order)
        throw ConfigError("cell: steps M (" + std::to_string(steps) + ") must be at least order N (" +
                          std::to_string(order) + ")");
      if (ranks.size() != order)
        throw ConfigError("cell: expected " + std::to_string(order) + " ranks, got " +
                          std::to_string(ranks.size()));
      if (std::any_of(ranks.begin(), ranks.end(), [](std::size_t r) { return r == 0; }))
        throw ConfigError("cell: ranks must be positive");
      break;
    case CellKind::kTtConvLstm:
      try {
        tt.validate();
      } catch (const ShapeError& e) {
        throw ConfigError(e.what());
      }
      if (tt.kernel != kernel) throw ConfigError("cell: TT kernel size differs from cell kernel");
      if (tt.out_channels() != 4 * out_channels)
        throw ConfigError("cell: TT output factors multiply to " + std::to_string(tt.out_channels()) +
                          ", expected 4 C_out = " + std::to_string(4 * out_channels));
      if (tt.in_channels() != in_channels)
        throw ConfigError("cell: TT input factors multiply to " + std::to_string(tt.in_channels()) +
                          ", expected C_in = " + std::to_string(in_channels));
      break;
  }
}

template <typename T>
void Cell<T>::add(std::string name, Tensor<T> value) {
  params_.push_back(Var<T>::parameter(std::move(value), name));
  names_.push_back(std::move(name));
}

template <typename T>
const Var<T>& Cell<T>::get(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error("cell has no parameter '" + name + "'");
  return params_[std::size_t(it - names_.begin())];
}

template <typename T>
Var<T> Cell<T>::maybe(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? Var<T>() : params_[std::size_t(it - names_.begin())];
}

template <typename T>
Cell<T> Cell<T>::build(const CellSpec& spec, std::uint64_t seed) {
  spec.validate();
  Cell cell;
  cell.spec_ = spec;
  const std::size_t k = spec.kernel, k2 = k * k, c = spec.out_channels, cin = spec.in_channels;
  std::uint64_t counter = 0;
  auto next_seed = [&] { return Rng::derive(seed, {counter++}).next_u64(); };
  auto gate_bias = [&] {
    Tensor<T> b({4 * c});
    if (spec.forget_bias_one)
      for (std::size_t j = c; j < 2 * c; ++j) b[j] = T(1);
    return b;
  };

  switch (spec.kind) {
    case CellKind::kConvLstm:
      cell.add("w", xavier_init<T>({k, k, cin, 4 * c}, k2 * cin, k2 * 4 * c, next_seed()));
      cell.add("k", xavier_init<T>({k, k, c, 4 * c}, k2 * c, k2 * 4 * c, next_seed()));
      if (spec.bias) cell.add("bias", gate_bias());
      break;
    case CellKind::kConvTtLstm: {
      cell.add("w", xavier_init<T>({k, k, cin, 4 * c}, k2 * cin, k2 * 4 * c, next_seed()));
      if (spec.bias) cell.add("bias", gate_bias());
      const std::size_t pch = spec.preprocess_channels();
      const CttShape shape = spec.ctt_shape();
      for (std::size_t i = 1; i <= spec.order; ++i) {
        const std::size_t r = shape.ranks[i];
        cell.add("pre" + std::to_string(i), xavier_init<T>({k, k, pch, r}, k2 * pch, k2 * r, next_seed()));
        if (spec.bias) cell.add("pre" + std::to_string(i) + "_bias", Tensor<T>({r}));
      }
      const CttFactors<T> factors = CttFactors<T>::random(shape, next_seed());
      for (std::size_t i = 1; i <= spec.order; ++i)
        cell.add("g" + std::to_string(i), factors.factors[i - 1]);
      break;
    }
    case CellKind::kTtConvLstm: {
      const auto w = TtCompressedKernel<T>::random(spec.tt, next_seed());
      for (std::size_t i = 0; i < w.factors.size(); ++i) cell.add("tt" + std::to_string(i), w.factors[i]);
      cell.add("k", xavier_init<T>({k, k, c, 4 * c}, k2 * c, k2 * 4 * c, next_seed()));
      if (spec.bias) cell.add("bias", gate_bias());
      break;
    }
  }
  return cell;
}

template <typename T>
std::size_t Cell<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value().size();
  return total;
}

template <typename T>
CellState<T> Cell<T>::initial_state(std::size_t h, std::size_t w) const {
  return CellState<T>::zeros(h, w, spec_.out_channels, spec_.history_length());
}

template <typename T>
ConvLstmParams<T> Cell<T>::conv_lstm_params() const {
  return {get("w"), get("k"), maybe("bias")};
}

template <typename T>
ConvTtLstmParams<T> Cell<T>::conv_tt_lstm_params() const {
  ConvTtLstmParams<T> p;
  p.w = get("w");
  p.bias = maybe("bias");
  p.steps = spec_.steps;
  for (std::size_t i = 1; i <= spec_.order; ++i) {
    p.preprocess.push_back(get("pre" + std::to_string(i)));
    if (spec_.bias) p.preprocess_bias.push_back(get("pre" + std::to_string(i) + "_bias"));
    p.factors.push_back(get("g" + std::to_string(i)));
  }
  return p;
}

template <typename T>
TtConvLstmParams<T> Cell<T>::tt_conv_lstm_params() const {
  TtConvLstmParams<T> p;
  p.tt = spec_.tt;
  for (std::size_t i = 0; i <= spec_.tt.order(); ++i) p.w_factors.push_back(get("tt" + std::to_string(i)));
  p.k = get("k");
  p.bias = maybe("bias");
  return p;
}

template <typename T>
StepResult<T> Cell<T>::step(const Var<T>& x, const CellState<T>& state) const {
  switch (spec_.kind) {
    case CellKind::kConvLstm:
      return conv_lstm_step(x, state, conv_lstm_params(), spec_.options);
    case CellKind::kConvTtLstm:
      return conv_tt_lstm_step(x, state, conv_tt_lstm_params(), spec_.window, spec_.algorithm,
                               spec_.options);
    case CellKind::kTtConvLstm:
      return tt_conv_lstm_step(x, state, tt_conv_lstm_params(), spec_.options);
  }
  throw Error("unknown cell kind");
}

#define CTTL_INSTANTIATE_CELLS(T)                                                               \
  template struct CellState<T>;                                                                 \
  template Var<T> lstm_update(const Var<T>&, const Var<T>&, const CellOptions&, Var<T>*);       \
  template Var<T> preprocess(std::span<const Var<T>>, const ConvTtLstmParams<T>&, std::size_t,  \
                             WindowMode, PadMode);                                              \
  template StepResult<T> conv_lstm_step(const Var<T>&, const CellState<T>&,                     \
                                        const ConvLstmParams<T>&, const CellOptions&);          \
  template StepResult<T> conv_tt_lstm_step(const Var<T>&, const CellState<T>&,                  \
                                           const ConvTtLstmParams<T>&, WindowMode, CttAlgorithm, \
                                           const CellOptions&);                                 \
  template StepResult<T> tt_conv_lstm_step(const Var<T>&, const CellState<T>&,                  \
                                           const TtConvLstmParams<T>&, const CellOptions&);     \
  template class Cell<T>;

CTTL_INSTANTIATE_CELLS(float)
CTTL_INSTANTIATE_CELLS(double)

}  // namespace cttl
