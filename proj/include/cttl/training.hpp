// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Loss, Adam, value clipping, plateau schedules and the training driver.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cttl/autodiff.hpp"
#include "cttl/io.hpp"
#include "cttl/predictor.hpp"

namespace cttl {

struct TrainConfig {
  double learning_rate = 1e-3;
  double clip_value = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 4;
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 0;  // 0 = one pass over the training set
  std::size_t val_limit = 0;        // 0 = every validation sequence
  std::size_t context_len = 10;
  std::size_t horizon = 10;
  std::size_t ss_patience = 3;
  std::size_t ss_decay_length = 10;
  double lr_decay = 0.5;
  std::size_t lr_patience = 5;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 = CTTL_THREADS, else 1

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Worker count: cfg.threads, else CTTL_THREADS, else 1.
std::size_t resolve_threads(const TrainConfig& cfg);

// ||pred - target||_F^2 + ||pred - target||_1 summed over every frame.
template <typename T>
Var<T> prediction_loss(std::span<const Var<T>> pred, std::span<const Var<T>> target);
template <typename T>
T prediction_loss(const Tensor<T>& pred, const Tensor<T>& target);

// Clamps every element to [-clip, clip].
template <typename T>
void clip_gradients(std::span<Tensor<T>> grads, T clip);

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;

  static AdamState zeros(std::span<const Var<T>> params);
};

// Bias-corrected Adam with the given learning rate. Throws NumericError naming
// the parameter when a gradient holds a NaN or infinity; nothing is updated
// in that case.
template <typename T>
void adam_step(std::span<const Var<T>> params, std::span<const Tensor<T>> grads,
               AdamState<T>& state, const TrainConfig& cfg, double lr);

// Plateau-driven teacher-forcing ratio and learning rate. The ratio stays 1
// until validation loss has not improved for `ss_patience` epochs, then falls
// by 1 / ss_decay_length per epoch to 0. The learning rate is multiplied by
// `lr_decay` after `lr_patience` epochs without improvement, on its own
// counter.
struct ScheduleState {
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stall = 0;
  std::size_t lr_stall = 0;
  bool sampling = false;
  std::size_t decay_epochs = 0;
  double teacher_ratio = 1.0;
  double lr = 1e-3;

  static ScheduleState initial(const TrainConfig& cfg);
};

struct ScheduleOutput {
  double teacher_ratio;
  double lr;
};

ScheduleOutput schedule_tick(ScheduleState& s, double val_loss, const TrainConfig& cfg);

// Indexable collection of [length, h, w, 1] sequences.
class SequenceSet {
 public:
  virtual ~SequenceSet() = default;
  virtual std::size_t size() const = 0;
  virtual Tensor<float> at(std::size_t i) const = 0;
};

class MemorySequences final : public SequenceSet {
 public:
  explicit MemorySequences(std::vector<Tensor<float>> seqs) : seqs_(std::move(seqs)) {}
  std::size_t size() const override { return seqs_.size(); }
  Tensor<float> at(std::size_t i) const override { return seqs_.at(i); }

 private:
  std::vector<Tensor<float>> seqs_;
};

// Sequences read on demand from a [n, length, h, w, 1] container.
class FileSequences final : public SequenceSet {
 public:
  explicit FileSequences(const std::filesystem::path& path);
  std::size_t size() const override;
  Tensor<float> at(std::size_t i) const override;

 private:
  std::shared_ptr<ContainerReader> reader_;
};

template <typename T>
std::vector<Var<T>> frames_of(const Tensor<float>& seq);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double teacher_ratio = 1;
  double lr = 0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

template <typename T>
struct TrainState {
  AdamState<T> adam;
  ScheduleState schedule;
  std::size_t epoch = 0;  // completed epochs
};

// Parameters, optimizer moments and schedule state as checkpoint entries.
template <typename T>
Checkpoint make_checkpoint(const Predictor<T>& model, const TrainState<T>* state,
                           std::string config_text);
// Loads parameters (and training state when requested) into a model built
// from the same configuration. Throws FormatError(kConfigMismatch) when names
// or shapes disagree.
template <typename T>
void restore_checkpoint(Predictor<T>& model, const Checkpoint& ckpt, TrainState<T>* state);

struct TrainHooks {
  std::function<void(const EpochMetrics&)> on_epoch;
  std::function<void(std::size_t step, double loss)> on_step;
  std::filesystem::path checkpoint;  // best-validation checkpoint, if set
  std::filesystem::path metrics_csv;  // appended per epoch, if set
  std::string config_text;            // stored as __config
};

template <typename T>
class Trainer {
 public:
  Trainer(Predictor<T> model, TrainConfig cfg);

  Predictor<T>& model() noexcept { return model_; }
  const TrainConfig& config() const noexcept { return cfg_; }
  TrainState<T>& state() noexcept { return state_; }

  // One optimizer step on a batch; returns the mean per-sequence loss.
  double step(std::span<const Tensor<float>> batch, double teacher_ratio, std::uint64_t step_key);
  // Mean per-sequence loss of closed-loop rollouts, without gradients.
  double evaluate(const SequenceSet& data, std::size_t limit = 0) const;
  // Runs epochs until cfg.epochs are complete, resuming from state().epoch.
  std::vector<EpochMetrics> fit(const SequenceSet& train, const SequenceSet* val,
                                const TrainHooks& hooks = {});

 private:
  RolloutPlan plan(double ratio) const;

  Predictor<T> model_;
  TrainConfig cfg_;
  TrainState<T> state_;
  std::vector<Var<T>> params_;
  std::vector<std::string> names_;
  std::size_t threads_ = 1;
};

}  // namespace cttl
