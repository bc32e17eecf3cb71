// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "cttl/data.hpp"
#include "cttl/rng.hpp"

namespace cttl {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0)) throw ConfigError("learning_rate must be non-negative");
  if (!(clip_value > 0)) throw ConfigError("clip_value must be positive");
  if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
    throw ConfigError("adam betas must lie in (0, 1)");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (context_len == 0 || horizon == 0) throw ConfigError("context_len and horizon must be positive");
  if (ss_decay_length == 0) throw ConfigError("ss_decay_length must be positive");
  if (!(lr_decay > 0 && lr_decay <= 1)) throw ConfigError("lr_decay must lie in (0, 1]");
}

std::size_t resolve_threads(const TrainConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("CTTL_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return std::size_t(n);
    throw ConfigError(std::string("CTTL_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

namespace {

// Runs f(0..n-1) on up to `threads` workers; rethrows the lowest-index failure.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

template <typename T>
Var<T> prediction_loss(std::span<const Var<T>> pred, std::span<const Var<T>> target) {
  if (pred.size() != target.size() || pred.empty())
    throw ShapeError("prediction_loss: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(target.size()) + " targets");
  Var<T> total;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const Var<T> d = sub(pred[t], target[t]);
    Var<T> term = add(sum(mul(d, d)), sum(abs(d)));
    total = total ? add(total, term) : term;
  }
  return total;
}

template <typename T>
T prediction_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target))
    throw ShapeError("prediction_loss: " + shape_str(pred.dims()) + " vs " +
                     shape_str(target.dims()));
  T sq = 0, ab = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const T d = pred[i] - target[i];
    sq += d * d;
    ab += std::abs(d);
  }
  return sq + ab;
}

template <typename T>
void clip_gradients(std::span<Tensor<T>> grads, T clip) {
  if (!(clip > 0)) throw ConfigError("clip value must be positive");
  for (auto& g : grads)
    for (auto& v : g.data()) v = std::clamp(v, -clip, clip);
}

template <typename T>
AdamState<T> AdamState<T>::zeros(std::span<const Var<T>> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.dims());
    s.v.emplace_back(p.dims());
  }
  return s;
}

template <typename T>
void adam_step(std::span<const Var<T>> params, std::span<const Tensor<T>> grads,
               AdamState<T>& state, const TrainConfig& cfg, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_step: parameter, gradient and moment counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!grads[k].same_shape(params[k].value()) || !state.m[k].same_shape(grads[k]))
      throw ShapeError("adam_step: shape mismatch for parameter '" + params[k].name() + "'");
    for (T g : grads[k].data())
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient in parameter '" +
                           (params[k].name().empty() ? std::to_string(k) : params[k].name()) + "'");
  }
  ++state.step;
  const double t = double(state.step);
  const T b1 = T(cfg.beta1), b2 = T(cfg.beta2), eps = T(cfg.epsilon);
  const T c1 = T(1.0 / (1.0 - std::pow(cfg.beta1, t)));
  const T c2 = T(1.0 / (1.0 - std::pow(cfg.beta2, t)));
  const T rate = T(lr);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T> p = params[k].value();
    T* m = state.m[k].raw();
    T* v = state.v[k].raw();
    const T* g = grads[k].raw();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      p[i] -= rate * (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
    }
    params[k].assign(std::move(p));
  }
}

ScheduleState ScheduleState::initial(const TrainConfig& cfg) {
  ScheduleState s;
  s.lr = cfg.learning_rate;
  return s;
}

ScheduleOutput schedule_tick(ScheduleState& s, double val_loss, const TrainConfig& cfg) {
  if (val_loss < s.best_val) {
    s.best_val = val_loss;
    s.stall = 0;
    s.lr_stall = 0;
  } else {
    ++s.stall;
    ++s.lr_stall;
  }
  if (!s.sampling && s.stall >= cfg.ss_patience) s.sampling = true;
  if (s.sampling) {
    ++s.decay_epochs;
    s.teacher_ratio =
        std::max(0.0, 1.0 - double(s.decay_epochs) / double(cfg.ss_decay_length));
  }
  if (s.lr_stall >= cfg.lr_patience) {
    s.lr *= cfg.lr_decay;
    s.lr_stall = 0;
  }
  return {s.teacher_ratio, s.lr};
}

// ---------------------------------------------------------------------------

namespace {
std::mutex& reader_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

FileSequences::FileSequences(const std::filesystem::path& path)
    : reader_(std::make_shared<ContainerReader>(path)) {
  if (reader_->dims().size() != 5)
    throw FormatError(FormatError::Kind::kBadRank,
                      path.string() + ": expected a [n, length, h, w, c] container");
}

std::size_t FileSequences::size() const { return reader_->count(); }

Tensor<float> FileSequences::at(std::size_t i) const {
  std::lock_guard lock(reader_mutex());
  return reader_->slice(i);
}

template <typename T>
std::vector<Var<T>> frames_of(const Tensor<float>& seq) {
  std::vector<Var<T>> out;
  for (std::size_t t = 0; t < seq.dim(0); ++t)
    out.push_back(Var<T>::constant(frame_at(seq, t).template cast<T>()));
  return out;
}

std::string metrics_csv_header() { return "epoch,train_loss,val_loss,teacher_ratio,lr"; }

std::string metrics_csv_row(const EpochMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.6g,%.6g", m.epoch, m.train_loss, m.val_loss,
                m.teacher_ratio, m.lr);
  return buf;
}

// ---------------------------------------------------------------------------

namespace {
const std::string kMomentM = "__adam_m/";
const std::string kMomentV = "__adam_v/";
const std::string kStateEntry = "__state";
constexpr std::size_t kStateFields = 9;
}  // namespace

template <typename T>
Checkpoint make_checkpoint(const Predictor<T>& model, const TrainState<T>* state,
                           std::string config_text) {
  Checkpoint ckpt;
  ckpt.config = std::move(config_text);
  const auto params = model.parameters();
  const auto names = model.parameter_names();
  for (std::size_t k = 0; k < params.size(); ++k) ckpt.entries.push_back({names[k], params[k].value()});
  if (state) {
    if (state->adam.m.size() == params.size())
      for (std::size_t k = 0; k < params.size(); ++k) {
        ckpt.entries.push_back({kMomentM + names[k], state->adam.m[k]});
        ckpt.entries.push_back({kMomentV + names[k], state->adam.v[k]});
      }
    const auto& s = state->schedule;
    Tensor<double> st({kStateFields}, std::vector<double>{
        double(state->epoch), double(state->adam.step), s.best_val, double(s.stall),
        double(s.lr_stall), s.sampling ? 1.0 : 0.0, double(s.decay_epochs), s.teacher_ratio, s.lr});
    ckpt.entries.push_back({kStateEntry, std::move(st)});
  }
  return ckpt;
}

namespace {
template <typename T>
Tensor<T> entry_as(const Checkpoint& ckpt, const std::string& name, const Shape& dims) {
  const CheckpointEntry* e = ckpt.find(name);
  if (!e)
    throw FormatError(FormatError::Kind::kConfigMismatch, "checkpoint lacks parameter '" + name + "'");
  Tensor<T> t = std::visit([](const auto& x) { return x.template cast<T>(); }, e->tensor);
  if (t.dims() != dims)
    throw FormatError(FormatError::Kind::kConfigMismatch,
                      "checkpoint parameter '" + name + "' has shape " + shape_str(t.dims()) +
                          ", model expects " + shape_str(dims));
  return t;
}
}  // namespace

template <typename T>
void restore_checkpoint(Predictor<T>& model, const Checkpoint& ckpt, TrainState<T>* state) {
  const auto params = model.parameters();
  const auto names = model.parameter_names();
  std::size_t model_entries = 0;
  for (const auto& e : ckpt.entries)
    if (e.name.rfind("__", 0) != 0) ++model_entries;
  if (model_entries != params.size())
    throw FormatError(FormatError::Kind::kConfigMismatch,
                      "checkpoint holds " + std::to_string(model_entries) + " parameters, model has " +
                          std::to_string(params.size()));
  std::vector<Tensor<T>> values;
  for (std::size_t k = 0; k < params.size(); ++k)
    values.push_back(entry_as<T>(ckpt, names[k], params[k].dims()));
  if (state) {
    TrainState<T> s;
    s.schedule = state->schedule;
    if (ckpt.find(kStateEntry)) {
      const auto& st = ckpt.get<double>(kStateEntry);
      if (st.size() != kStateFields)
        throw FormatError(FormatError::Kind::kCorruptEntry, "training state entry is malformed");
      s.epoch = std::size_t(st[0]);
      s.adam.step = std::uint64_t(st[1]);
      s.schedule.best_val = st[2];
      s.schedule.stall = std::size_t(st[3]);
      s.schedule.lr_stall = std::size_t(st[4]);
      s.schedule.sampling = st[5] != 0;
      s.schedule.decay_epochs = std::size_t(st[6]);
      s.schedule.teacher_ratio = st[7];
      s.schedule.lr = st[8];
      if (ckpt.find(kMomentM + names.front())) {
        for (std::size_t k = 0; k < params.size(); ++k) {
          s.adam.m.push_back(entry_as<T>(ckpt, kMomentM + names[k], params[k].dims()));
          s.adam.v.push_back(entry_as<T>(ckpt, kMomentV + names[k], params[k].dims()));
        }
      }
    }
    if (s.adam.m.empty()) {
      s.adam = AdamState<T>::zeros(std::span<const Var<T>>(params));
      s.adam.step = 0;
    }
    *state = std::move(s);
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k].assign(std::move(values[k]));
}

// ---------------------------------------------------------------------------

template <typename T>
Trainer<T>::Trainer(Predictor<T> model, TrainConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {
  cfg_.validate();
  params_ = model_.parameters();
  names_ = model_.parameter_names();
  state_.adam = AdamState<T>::zeros(std::span<const Var<T>>(params_));
  state_.schedule = ScheduleState::initial(cfg_);
  threads_ = resolve_threads(cfg_);
}

template <typename T>
RolloutPlan Trainer<T>::plan(double ratio) const {
  return {cfg_.context_len, cfg_.horizon, ratio};
}

template <typename T>
double Trainer<T>::step(std::span<const Tensor<float>> batch, double teacher_ratio,
                        std::uint64_t step_key) {
  if (batch.empty()) throw ConfigError("training step needs a non-empty batch");
  const std::size_t need = cfg_.context_len + cfg_.horizon;
  for (const auto& s : batch)
    if (s.rank() != 4 || s.dim(0) < need)
      throw ConfigError("training sequences need " + std::to_string(need) + " frames, got " +
                        shape_str(s.dims()));
  const RolloutPlan p = plan(teacher_ratio);
  std::vector<std::vector<Tensor<T>>> grads(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), threads_, [&](std::size_t i) {
    Rng rng = Rng::derive(cfg_.seed, {4, step_key, i});
    Predictor<T> m = model_;
    Tape<T> tape;
    typename Tape<T>::Scope scope(tape);
    const auto frames = frames_of<T>(batch[i]);
    const auto outs = m.rollout(frames, p, &rng);
    const auto targets = std::span<const Var<T>>(frames).subspan(cfg_.context_len, cfg_.horizon);
    const Var<T> loss = prediction_loss(std::span<const Var<T>>(outs), targets);
    losses[i] = double(loss.value()[0]);
    if (!std::isfinite(losses[i])) return;
    tape.backward(loss);
    grads[i] = tape.gradients(std::span<const Var<T>>(params_));
  });
  double mean = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!std::isfinite(losses[i]))
      throw NumericError("non-finite training loss at step " + std::to_string(step_key) +
                         ", sample " + std::to_string(i));
    mean += losses[i];
  }
  mean /= double(batch.size());
  std::vector<Tensor<T>> total = std::move(grads[0]);
  for (std::size_t i = 1; i < batch.size(); ++i)
    for (std::size_t k = 0; k < total.size(); ++k) accumulate(total[k], grads[i][k]);
  const T inv = T(1) / T(batch.size());
  for (auto& g : total)
    for (auto& v : g.data()) v *= inv;
  clip_gradients(std::span<Tensor<T>>(total), T(cfg_.clip_value));
  adam_step(std::span<const Var<T>>(params_), std::span<const Tensor<T>>(total), state_.adam, cfg_,
            state_.schedule.lr);
  return mean;
}

template <typename T>
double Trainer<T>::evaluate(const SequenceSet& data, std::size_t limit) const {
  const std::size_t n = limit ? std::min(limit, data.size()) : data.size();
  if (n == 0) throw ConfigError("evaluation set is empty");
  std::vector<Tensor<float>> seqs;
  for (std::size_t i = 0; i < n; ++i) seqs.push_back(data.at(i));
  std::vector<double> losses(n);
  const RolloutPlan p = plan(0.0);
  parallel_for(n, threads_, [&](std::size_t i) {
    Predictor<T> m = model_;
    const auto frames = frames_of<T>(seqs[i]);
    if (frames.size() < cfg_.context_len + cfg_.horizon)
      throw ConfigError("evaluation sequence is shorter than context + horizon");
    const auto outs = m.rollout(frames, p);
    const auto targets = std::span<const Var<T>>(frames).subspan(cfg_.context_len, cfg_.horizon);
    losses[i] = double(prediction_loss(std::span<const Var<T>>(outs), targets).value()[0]);
  });
  const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / double(n);
  if (!std::isfinite(mean)) throw NumericError("non-finite validation loss");
  return mean;
}

template <typename T>
std::vector<EpochMetrics> Trainer<T>::fit(const SequenceSet& train, const SequenceSet* val,
                                          const TrainHooks& hooks) {
  if (train.size() == 0) throw ConfigError("training set is empty");
  std::vector<EpochMetrics> log;
  const std::size_t n = train.size(), b = cfg_.batch_size;
  const std::size_t steps = cfg_.steps_per_epoch ? cfg_.steps_per_epoch : (n + b - 1) / b;
  if (!hooks.metrics_csv.empty() && state_.epoch == 0) {
    std::ofstream csv(hooks.metrics_csv, std::ios::trunc);
    if (!csv) throw FormatError(FormatError::Kind::kIo, "cannot write " + hooks.metrics_csv.string());
    csv << metrics_csv_header() << '\n';
  }
  while (state_.epoch < cfg_.epochs) {
    const std::size_t epoch = state_.epoch;
    const double ratio = state_.schedule.teacher_ratio, lr = state_.schedule.lr;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = Rng::derive(cfg_.seed, {3, epoch});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double train_loss = 0;
    std::vector<Tensor<float>> batch(b);
    for (std::size_t s = 0; s < steps; ++s) {
      for (std::size_t j = 0; j < b; ++j) batch[j] = train.at(order[(s * b + j) % n]);
      const std::uint64_t key = state_.adam.step;
      const double loss = step(batch, ratio, key);
      train_loss += loss;
      if (hooks.on_step) hooks.on_step(key + 1, loss);
    }
    train_loss /= double(steps);
    const double val_loss = val ? evaluate(*val, cfg_.val_limit) : train_loss;
    const bool improved = val_loss < state_.schedule.best_val;
    schedule_tick(state_.schedule, val_loss, cfg_);
    state_.epoch = epoch + 1;

    EpochMetrics m{epoch + 1, train_loss, val_loss, ratio, lr};
    log.push_back(m);
    if (!hooks.checkpoint.empty()) {
      const Checkpoint ckpt = make_checkpoint(model_, &state_, hooks.config_text);
      std::filesystem::path last = hooks.checkpoint;
      last += ".last";
      save_checkpoint(last, ckpt);
      if (improved) save_checkpoint(hooks.checkpoint, ckpt);
    }
    if (!hooks.metrics_csv.empty()) {
      std::ofstream csv(hooks.metrics_csv, std::ios::app);
      csv << metrics_csv_row(m) << '\n';
    }
    if (hooks.on_epoch) hooks.on_epoch(m);
  }
  return log;
}

#define CTTL_INSTANTIATE_TRAINING(T)                                                          \
  template Var<T> prediction_loss(std::span<const Var<T>>, std::span<const Var<T>>);          \
  template T prediction_loss(const Tensor<T>&, const Tensor<T>&);                             \
  template void clip_gradients(std::span<Tensor<T>>, T);                                      \
  template struct AdamState<T>;                                                               \
  template void adam_step(std::span<const Var<T>>, std::span<const Tensor<T>>, AdamState<T>&, \
                          const TrainConfig&, double);                                        \
  template std::vector<Var<T>> frames_of(const Tensor<float>&);                               \
  template Checkpoint make_checkpoint(const Predictor<T>&, const TrainState<T>*, std::string); \
  template void restore_checkpoint(Predictor<T>&, const Checkpoint&, TrainState<T>*);         \
  template class Trainer<T>;

CTTL_INSTANTIATE_TRAINING(float)
CTTL_INSTANTIATE_TRAINING(double)

}  // namespace cttl
