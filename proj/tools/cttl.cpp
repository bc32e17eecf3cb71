// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// cttl: data generation, training, evaluation, cost analysis and the oracle
// suite. Exit codes: 0 success, 1 verification or runtime failure, 2 usage or
// configuration error.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cttl/analysis.hpp"
#include "cttl/config.hpp"
#include "cttl/data.hpp"
#include "cttl/io.hpp"
#include "cttl/training.hpp"
#include "cttl/verify.hpp"

namespace fs = std::filesystem;
using namespace cttl;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

fs::path split_path(const fs::path& dir, const std::string& split) { return dir / (split + ".tc"); }

std::pair<std::size_t, std::size_t> parse_dims(const std::string& s) {
  const auto x = s.find('x');
  auto number = [&](const std::string& part) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw UsageError("bad frame dims '" + s + "', expected HxW");
    const unsigned long v = std::stoul(part);
    if (v == 0) throw UsageError("frame dims must be positive: '" + s + "'");
    return std::size_t(v);
  };
  if (x == std::string::npos) throw UsageError("bad frame dims '" + s + "', expected HxW");
  return {number(s.substr(0, x)), number(s.substr(x + 1))};
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config, out;
  std::vector<std::string> sets;
  std::size_t length = 0;
};

int run_generate(const GenerateArgs& a) {
  ExperimentConfig c = load_with_overrides(a.config, a.sets);
  if (a.length) c.data.sequence_length = a.length;
  c.data.validate();
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw FormatError(FormatError::Kind::kIo, "cannot create " + a.out + ": " + ec.message());
  const SpriteSource source = c.data.source();
  const struct {
    const char* name;
    std::size_t count;
  } splits[] = {{"train", c.data.train_count}, {"val", c.data.val_count}, {"test", c.data.test_count}};
  std::printf("seed %llu, length %zu, canvas %zu\n", static_cast<unsigned long long>(c.data.seed),
              c.data.sequence_length, c.data.generator.canvas);
  for (std::size_t s = 0; s < 3; ++s) {
    const fs::path p = split_path(a.out, splits[s].name);
    write_split(p, source, c.data.generator, splits[s].count, c.data.sequence_length, c.data.seed, s);
    std::printf("%-5s %7zu sequences  %s  fnv1a %016llx\n", splits[s].name, splits[s].count,
                p.string().c_str(), static_cast<unsigned long long>(file_checksum(p)));
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out, cell, resume, metrics;
  std::vector<std::string> sets;
  std::size_t epochs = 0;
};

int run_train(const TrainArgs& a) {
  ExperimentConfig c;
  std::optional<Checkpoint> resumed;
  if (!a.resume.empty()) {
    resumed = load_checkpoint(a.resume);
    c = parse_config(resumed->config);
    if (!a.config.empty() || !a.cell.empty())
      throw UsageError("--resume takes the configuration from the checkpoint");
    for (const auto& kv : a.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
  } else {
    c = load_with_overrides(a.config, a.sets);
    if (!a.cell.empty()) c.model.kind = parse_cell_kind(a.cell);
  }
  if (a.epochs) c.train.epochs = a.epochs;
  c.validate();

  FileSequences train(split_path(a.data, "train"));
  const fs::path val_path = split_path(a.data, "val");
  std::optional<FileSequences> val;
  if (fs::exists(val_path)) val.emplace(val_path);

  Trainer<float> trainer(Predictor<float>::build(c.model, c.train.seed), c.train);
  if (resumed) {
    restore_checkpoint(trainer.model(), *resumed, &trainer.state());
    std::printf("resuming after epoch %zu\n", trainer.state().epoch);
  }
  std::printf("%s, %zu parameters, %zu training sequences\n", to_string(c.model.kind).c_str(),
              trainer.model().parameter_count(), train.size());
  TrainHooks hooks;
  hooks.checkpoint = a.out;
  hooks.metrics_csv = a.metrics.empty() ? a.out + ".metrics.csv" : a.metrics;
  hooks.config_text = render_config(c);
  hooks.on_epoch = [](const EpochMetrics& m) {
    std::printf("epoch %zu  train %.6g  val %.6g  teacher %.3g  lr %.3g\n", m.epoch, m.train_loss,
                m.val_loss, m.teacher_ratio, m.lr);
    std::fflush(stdout);
  };
  trainer.fit(train, val ? &*val : nullptr, hooks);
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string ckpt, data, split = "test", exp, csv;
  std::size_t horizon = 0, limit = 0;
  bool ground_truth = false;
};

Tensor<float> side_by_side(const std::vector<Tensor<float>>& pred, const std::vector<Tensor<float>>& truth) {
  const std::size_t h = truth[0].dim(0), w = truth[0].dim(1), gap = 2;
  Tensor<float> grid({pred.size(), h, 2 * w + gap, 1});
  for (std::size_t t = 0; t < pred.size(); ++t)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        grid.at(t, y, x, 0) = pred[t].at(y, x, 0);
        grid.at(t, y, w + gap + x, 0) = truth[t].at(y, x, 0);
      }
  return grid;
}

int run_evaluate(const EvaluateArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.ckpt);
  const ExperimentConfig c = parse_config(ckpt.config);
  Predictor<float> model = Predictor<float>::build(c.model, c.train.seed);
  restore_checkpoint(model, ckpt, static_cast<TrainState<float>*>(nullptr));
  RolloutPlan plan{c.train.context_len, a.horizon ? a.horizon : c.train.horizon, 0.0};
  plan.validate();

  FileSequences data(split_path(a.data, a.split));
  const std::size_t n = a.limit ? std::min(a.limit, data.size()) : data.size();
  if (n == 0) throw ConfigError("no sequences to evaluate");
  std::vector<double> mse_sum(plan.horizon, 0.0), psnr_sum(plan.horizon, 0.0), ssim_sum(plan.horizon, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const Tensor<float> seq = data.at(s);
    if (seq.dim(0) < plan.context_len + plan.horizon)
      throw ConfigError("sequences have " + std::to_string(seq.dim(0)) + " frames; context " +
                        std::to_string(plan.context_len) + " + horizon " + std::to_string(plan.horizon) +
                        " needed");
    std::vector<Tensor<float>> pred, truth;
    for (std::size_t k = 0; k < plan.horizon; ++k) truth.push_back(frame_at(seq, plan.context_len + k));
    if (a.ground_truth) {
      pred = truth;
    } else {
      const auto frames = frames_of<float>(seq);
      for (const auto& v : model.rollout(std::span<const Var<float>>(frames).first(plan.context_len), plan))
        pred.push_back(clamp(v.value(), 0.0f, 1.0f));
    }
    for (std::size_t k = 0; k < plan.horizon; ++k) {
      const double m = mse(pred[k], truth[k]);
      mse_sum[k] += m;
      psnr_sum[k] += std::min(psnr_from_mse(m), 100.0);
      ssim_sum[k] += ssim(pred[k], truth[k]);
    }
    if (s == 0 && !a.exp.empty()) {
      const auto paths = export_frames(side_by_side(pred, truth), a.exp);
      std::printf("exported %zu frames to %s (prediction | ground truth)\n", paths.size(), a.exp.c_str());
    }
  }
  std::ofstream csv;
  if (!a.csv.empty()) {
    csv.open(a.csv, std::ios::trunc);
    if (!csv) throw FormatError(FormatError::Kind::kIo, "cannot write " + a.csv);
    csv << "frame,mse,psnr,ssim\n";
  }
  std::printf("%5s %12s %9s %8s\n", "frame", "mse", "psnr", "ssim");
  double tm = 0, tp = 0, ts = 0;
  for (std::size_t k = 0; k < plan.horizon; ++k) {
    const double m = mse_sum[k] / double(n), p = psnr_sum[k] / double(n), s = ssim_sum[k] / double(n);
    tm += m;
    tp += p;
    ts += s;
    std::printf("%5zu %12.6g %9.4f %8.5f\n", k + 1, m, p, s);
    if (csv) csv << (k + 1) << ',' << m << ',' << p << ',' << s << '\n';
  }
  const double h = double(plan.horizon);
  std::printf("%5s %12.6g %9.4f %8.5f   (%zu sequences, PSNR capped at 100 dB)\n", "mean", tm / h, tp / h,
              ts / h, n);
  return kOk;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string config, preset, cell, dims = "64x64", csv;
  std::vector<std::string> sets;
  bool compare = false;
};

int run_analyze(const AnalyzeArgs& a) {
  if (!a.config.empty() && !a.preset.empty()) throw UsageError("--config and --preset are exclusive");
  const auto [h, w] = parse_dims(a.dims);
  PredictorConfig model;
  if (a.preset.empty()) {
    model = load_with_overrides(a.config, a.sets).model;
    if (!a.cell.empty()) model.kind = parse_cell_kind(a.cell);
  } else {
    const CellKind kind = a.cell.empty() ? CellKind::kConvTtLstm : parse_cell_kind(a.cell);
    if (a.preset == "twelve-layer")
      model = twelve_layer_config(kind);
    else if (a.preset == "four-layer")
      model = four_layer_config(kind);
    else
      throw UsageError("unknown preset '" + a.preset + "' (twelve-layer, four-layer)");
  }
  if (!a.compare) {
    const CostReport r = analyze(model, h, w);
    std::printf("%s on %zux%zu frames\n%s", to_string(model.kind).c_str(), h, w, r.to_text().c_str());
    if (!a.csv.empty()) {
      std::ofstream(a.csv) << r.to_csv();
    }
    return kOk;
  }
  PredictorConfig base = model, ctt = model;
  base.kind = CellKind::kConvLstm;
  ctt.kind = CellKind::kConvTtLstm;
  const CostReport rb = analyze(base, h, w), rc = analyze(ctt, h, w);
  std::printf("%zux%zu frames\n%-10s %14s %14s %18s %18s\n", h, w, "layer", "conv-lstm", "conv-tt-lstm",
              "flops conv-lstm", "flops conv-tt-lstm");
  for (std::size_t i = 0; i < rb.layers.size(); ++i)
    std::printf("%-10s %14zu %14zu %18llu %18llu\n", rb.layers[i].name.c_str(), rb.layers[i].params,
                rc.layers[i].params, static_cast<unsigned long long>(rb.layers[i].flops),
                static_cast<unsigned long long>(rc.layers[i].flops));
  std::printf("%-10s %14zu %14zu %18llu %18llu\n", "total", rb.total_params(), rc.total_params(),
              static_cast<unsigned long long>(rb.total_flops()),
              static_cast<unsigned long long>(rc.total_flops()));
  std::printf("ratio      %14s %14.4f %18s %18.4f\n", "", double(rc.total_params()) / double(rb.total_params()),
              "", double(rc.total_flops()) / double(rb.total_flops()));
  if (!a.csv.empty()) {
    std::ofstream out(a.csv);
    out << "layer,params_conv_lstm,params_conv_tt_lstm,flops_conv_lstm,flops_conv_tt_lstm\n";
    for (std::size_t i = 0; i < rb.layers.size(); ++i)
      out << rb.layers[i].name << ',' << rb.layers[i].params << ',' << rc.layers[i].params << ','
          << rb.layers[i].flops << ',' << rc.layers[i].flops << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  bool quick = false;
  std::string mutation = "none";
  std::uint64_t seed = 1;
};

int run_verify_cmd(const VerifyArgs& a) {
  VerifyOptions opts;
  opts.quick = a.quick;
  opts.seed = a.seed;
  if (a.mutation == "transpose-kernel")
    opts.mutation = Mutation::kTransposeKernel;
  else if (a.mutation != "none")
    throw UsageError("unknown mutation '" + a.mutation + "' (none, transpose-kernel)");
  std::size_t failed = 0;
  run_verify(opts, [&](const CheckResult& r) {
    if (!r.passed) ++failed;
    std::printf("%s  %-60s %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(),
                r.seconds);
    std::fflush(stdout);
  });
  std::printf("%s\n", failed ? "verification FAILED" : "all checks passed");
  return failed ? kFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional tensor-train LSTM video prediction"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate-data", "Write train/val/test sequence containers");
  g->add_option("--config", gen.config, "Experiment config file");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--length", gen.length, "Override the sequence length");
  g->add_option("--set", gen.sets, "key=value override (repeatable)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a predictor");
  t->add_option("--config", tr.config, "Experiment config file");
  t->add_option("--data", tr.data, "Directory holding train.tc and val.tc")->required();
  t->add_option("--out", tr.out, "Best-validation checkpoint path")->required();
  t->add_option("--cell", tr.cell, "conv-lstm | conv-tt-lstm | tt-conv-lstm");
  t->add_option("--resume", tr.resume, "Continue from a checkpoint (usually OUT.last)");
  t->add_option("--metrics", tr.metrics, "Metrics CSV (default OUT.metrics.csv)");
  t->add_option("--epochs", tr.epochs, "Override the epoch count");
  t->add_option("--set", tr.sets, "key=value override (repeatable)");

  EvaluateArgs ev;
  auto add_eval = [&](const char* name) {
    auto* e = app.add_subcommand(name, "Closed-loop rollout with per-frame MSE/PSNR/SSIM");
    e->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
    e->add_option("--data", ev.data, "Data directory")->required();
    e->add_option("--split", ev.split, "train | val | test")->check(CLI::IsMember({"train", "val", "test"}));
    e->add_option("--horizon", ev.horizon, "Frames to predict (default from config)")
        ->check(CLI::PositiveNumber);
    e->add_option("--limit", ev.limit, "Evaluate at most this many sequences");
    e->add_option("--export", ev.exp, "Write PGM frames of the first sequence here");
    e->add_option("--csv", ev.csv, "Per-frame metrics CSV");
    e->add_flag("--ground-truth", ev.ground_truth, "Score ground truth against itself");
    return e;
  };
  auto* pr = add_eval("predict");
  auto* es = add_eval("evaluate");

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Parameter and FLOP counts");
  a->add_option("--config", an.config, "Experiment config file");
  a->add_option("--preset", an.preset, "twelve-layer | four-layer");
  a->add_option("--cell", an.cell, "Cell kind override");
  a->add_option("--frame-dims", an.dims, "Frame size HxW");
  a->add_option("--csv", an.csv, "Write the report as CSV");
  a->add_option("--set", an.sets, "key=value override (repeatable)");
  a->add_flag("--compare", an.compare, "ConvLSTM and Conv-TT-LSTM side by side");

  VerifyArgs vf;
  auto* v = app.add_subcommand("verify", "Run the oracle suite");
  v->add_flag("--quick", vf.quick, "Reduced sweep");
  v->add_option("--mutation", vf.mutation, "none | transpose-kernel");
  v->add_option("--seed", vf.seed, "Seed for random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (g->parsed()) return run_generate(gen);
    if (t->parsed()) return run_train(tr);
    if (pr->parsed() || es->parsed()) return run_evaluate(ev);
    if (a->parsed()) return run_analyze(an);
    if (v->parsed()) return run_verify_cmd(vf);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == FormatError::Kind::kConfigMismatch ? kUsage : kFailure;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kUsage;
}
