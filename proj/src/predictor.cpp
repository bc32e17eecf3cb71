// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/predictor.hpp"

#include <algorithm>
#include <string>

namespace cttl {

std::size_t PredictorConfig::layer_input_channels(std::size_t l) const {
  if (l < 1 || l > layers()) throw ConfigError("layer index " + std::to_string(l) + " out of range");
  std::size_t c = l == 1 ? input_channels : channels[l - 2];
  for (const auto& [src, dst] : skips)
    if (dst == l) c += channels.at(src - 1);
  return c;
}

std::vector<CellSpec> PredictorConfig::cell_specs() const {
  std::vector<CellSpec> specs;
  for (std::size_t l = 1; l <= layers(); ++l) {
    CellSpec s;
    s.kind = kind;
    s.in_channels = layer_input_channels(l);
    s.out_channels = channels[l - 1];
    s.kernel = kernel;
    s.bias = bias;
    s.forget_bias_one = forget_bias_one;
    s.options = options;
    s.order = order;
    s.steps = steps;
    s.window = window;
    s.algorithm = algorithm;
    if (kind == CellKind::kConvTtLstm) {
      if (ranks.size() == 1)
        s.ranks.assign(order, ranks[0]);
      else
        s.ranks = ranks;
    }
    if (kind == CellKind::kTtConvLstm) {
      s.tt.kernel = kernel;
      s.tt.out_factors = balanced_factorization(4 * s.out_channels, tt_order);
      s.tt.in_factors = balanced_factorization(s.in_channels, tt_order);
      s.tt.ranks.assign(tt_order, tt_rank);
    }
    specs.push_back(std::move(s));
  }
  return specs;
}

void PredictorConfig::validate() const {
  if (channels.empty()) throw ConfigError("predictor: at least one layer is required");
  if (input_channels == 0) throw ConfigError("predictor: input_channels must be positive");
  if (std::count(channels.begin(), channels.end(), std::size_t{0}) != 0)
    throw ConfigError("predictor: layer channels must be positive");
  for (std::size_t i = 0; i < skips.size(); ++i) {
    const auto [src, dst] = skips[i];
    if (src < 1 || dst > layers() || src >= dst)
      throw ConfigError("predictor: skip " + std::to_string(src) + "->" + std::to_string(dst) +
                        " must join an earlier layer to a later one within 1.." +
                        std::to_string(layers()));
    if (std::find(skips.begin(), skips.begin() + long(i), skips[i]) != skips.begin() + long(i))
      throw ConfigError("predictor: duplicate skip " + std::to_string(src) + "->" +
                        std::to_string(dst));
  }
  if (kind == CellKind::kConvTtLstm && ranks.size() != 1 && ranks.size() != order)
    throw ConfigError("predictor: ranks must hold 1 or N = " + std::to_string(order) + " entries");
  if (kind == CellKind::kTtConvLstm && (tt_order == 0 || tt_rank == 0))
    throw ConfigError("predictor: tt_order and tt_rank must be positive");
  for (const auto& s : cell_specs()) s.validate();
}

PredictorConfig twelve_layer_config(CellKind kind, std::size_t steps, WindowMode window) {
  PredictorConfig c;
  c.kind = kind;
  c.input_channels = 1;
  c.channels = {32, 32, 32, 48, 48, 48, 48, 48, 48, 32, 32, 32};
  c.skips = {{3, 9}, {6, 12}};
  c.kernel = 5;
  c.order = 3;
  c.steps = steps;
  c.ranks = {8};
  c.window = window;
  return c;
}

PredictorConfig four_layer_config(CellKind kind, std::size_t steps, WindowMode window) {
  PredictorConfig c = twelve_layer_config(kind, steps, window);
  c.channels = {128, 128, 128, 128};
  c.skips.clear();
  return c;
}

void RolloutPlan::validate() const {
  if (context_len < 1) throw ConfigError("rollout: context length must be at least 1");
  if (horizon < 1) throw ConfigError("rollout: horizon must be at least 1");
  if (!(teacher_ratio >= 0.0 && teacher_ratio <= 1.0))
    throw ConfigError("rollout: teacher ratio must lie in [0, 1]");
}

template <typename T>
Predictor<T> Predictor<T>::build(const PredictorConfig& config, std::uint64_t seed) {
  config.validate();
  Predictor p;
  p.config_ = config;
  const auto specs = config.cell_specs();
  for (std::size_t l = 0; l < specs.size(); ++l)
    p.cells_.push_back(Cell<T>::build(specs[l], Rng::derive(seed, {1, l + 1}).next_u64()));
  const std::size_t c = config.channels.back(), out = config.input_channels;
  p.head_w_ = Var<T>::parameter(
      xavier_init<T>({1, 1, c, out}, c, out, Rng::derive(seed, {2}).next_u64()), "head/w");
  p.head_b_ = Var<T>::parameter(Tensor<T>({out}), "head/bias");
  return p;
}

template <typename T>
std::vector<Var<T>> Predictor<T>::parameters() const {
  std::vector<Var<T>> out;
  for (const auto& c : cells_) out.insert(out.end(), c.parameters().begin(), c.parameters().end());
  out.push_back(head_w_);
  out.push_back(head_b_);
  return out;
}

template <typename T>
std::vector<std::string> Predictor<T>::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < cells_.size(); ++l)
    for (const auto& n : cells_[l].parameter_names())
      out.push_back("layer" + std::to_string(l + 1) + "/" + n);
  out.push_back("head/w");
  out.push_back("head/bias");
  return out;
}

template <typename T>
std::size_t Predictor<T>::parameter_count() const {
  std::size_t total = head_w_.value().size() + head_b_.value().size();
  for (const auto& c : cells_) total += c.parameter_count();
  return total;
}

template <typename T>
void Predictor<T>::reset(std::size_t h, std::size_t w) {
  h_ = h;
  w_ = w;
  states_.clear();
  for (const auto& c : cells_) states_.push_back(c.initial_state(h, w));
}

template <typename T>
Var<T> Predictor<T>::step(const Var<T>& frame) {
  const Shape& d = frame.dims();
  if (d.size() != 3 || d[2] != config_.input_channels)
    throw ShapeError("predictor: frame " + shape_str(d) + " does not have " +
                     std::to_string(config_.input_channels) + " channels");
  if (states_.empty() || d[0] != h_ || d[1] != w_) reset(d[0], d[1]);
  std::vector<Var<T>> outs;
  outs.reserve(cells_.size());
  for (std::size_t l = 1; l <= cells_.size(); ++l) {
    Var<T> input = l == 1 ? frame : outs[l - 2];
    std::vector<Var<T>> parts{input};
    for (const auto& [src, dst] : config_.skips)
      if (dst == l) parts.push_back(outs[src - 1]);
    if (parts.size() > 1) input = concat_channels(std::span<const Var<T>>(parts));
    auto r = cells_[l - 1].step(input, states_[l - 1]);
    states_[l - 1] = std::move(r.state);
    outs.push_back(std::move(r.hidden));
  }
  Var<T> y = add_channel_bias(conv2d(outs.back(), head_w_, config_.options.pad), head_b_);
  return config_.head_sigmoid ? sigmoid(y) : y;
}

template <typename T>
std::vector<Var<T>> Predictor<T>::rollout(std::span<const Var<T>> frames, const RolloutPlan& plan,
                                          Rng* rng) {
  plan.validate();
  if (frames.size() < plan.context_len)
    throw ConfigError("rollout: " + std::to_string(frames.size()) + " frames given, context needs " +
                      std::to_string(plan.context_len));
  const std::size_t total = plan.context_len + plan.horizon - 1;
  if (plan.teacher_ratio > 0.0 && frames.size() < total)
    throw ConfigError("rollout: teacher forcing needs " + std::to_string(total) + " frames");
  if (plan.teacher_ratio > 0.0 && plan.teacher_ratio < 1.0 && !rng)
    throw ConfigError("rollout: stochastic teacher ratio needs a random stream");
  const Shape& d = frames[0].dims();
  if (d.size() != 3) throw ShapeError("rollout: frames must be [h, w, c]");
  reset(d[0], d[1]);

  std::vector<Var<T>> outputs;
  outputs.reserve(plan.horizon);
  Var<T> prediction;
  for (std::size_t t = 0; t < total; ++t) {
    bool teacher = t < plan.context_len;
    if (!teacher) {
      if (plan.teacher_ratio >= 1.0)
        teacher = true;
      else if (plan.teacher_ratio > 0.0)
        teacher = rng->bernoulli(plan.teacher_ratio);
    }
    prediction = step(teacher ? frames[t] : prediction);
    if (t + 1 >= plan.context_len) outputs.push_back(prediction);
  }
  return outputs;
}

template class Predictor<float>;
template class Predictor<double>;

}  // namespace cttl
