// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include "cttl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace cttl {

std::string to_string(CellKind k) {
  switch (k) {
    case CellKind::kConvLstm:
      return "conv-lstm";
    case CellKind::kConvTtLstm:
      return "conv-tt-lstm";
    case CellKind::kTtConvLstm:
      return "tt-conv-lstm";
  }
  return "?";
}

CellKind parse_cell_kind(const std::string& s) {
  if (s == "conv-lstm") return CellKind::kConvLstm;
  if (s == "conv-tt-lstm") return CellKind::kConvTtLstm;
  if (s == "tt-conv-lstm") return CellKind::kTtConvLstm;
  throw ConfigError("unknown cell kind '" + s + "' (conv-lstm, conv-tt-lstm, tt-conv-lstm)");
}

SpriteSource DataConfig::source() const {
  if (sprites == "idx") {
    SpriteSource s = SpriteSource::from_idx(idx_path);
    if (s.sprite_size() != sprite_size)
      throw ConfigError("IDX sprites are 28x28; set sprite_size = 28");
    return s;
  }
  return SpriteSource::synthetic(seed, sprite_size);
}

void DataConfig::validate() const {
  if (sprites != "synthetic" && sprites != "idx")
    throw ConfigError("sprites must be 'synthetic' or 'idx', got '" + sprites + "'");
  if (sprites == "idx" && idx_path.empty()) throw ConfigError("sprites = idx requires idx_path");
  if (sprite_size == 0 || sprite_size > generator.canvas)
    throw ConfigError("sprite_size must lie in 1..canvas");
  if (sequence_length == 0) throw ConfigError("sequence_length must be positive");
  if (!(generator.speed_min >= 0 && generator.speed_max >= generator.speed_min))
    throw ConfigError("speed range must satisfy 0 <= speed_min <= speed_max");
}

void ExperimentConfig::validate() const {
  model.validate();
  train.validate();
  data.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string from_double(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty()) return out;
  for (const auto& item : split(v, ',')) out.push_back(to_size(key, item));
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

#define SIZE_FIELD(name, member)                                                        \
  Field {                                                                               \
    name, [](const ExperimentConfig& c) { return std::to_string(c.member); },           \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {           \
          c.member = to_size(k, v);                                                     \
        }                                                                               \
  }
#define DOUBLE_FIELD(name, member)                                                      \
  Field {                                                                               \
    name, [](const ExperimentConfig& c) { return from_double(c.member); },              \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {           \
          c.member = to_double(k, v);                                                   \
        }                                                                               \
  }
#define BOOL_FIELD(name, member)                                                        \
  Field {                                                                               \
    name, [](const ExperimentConfig& c) { return from_bool(c.member); },                \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {           \
          c.member = to_bool(k, v);                                                     \
        }                                                                               \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      // model
      Field{"cell", [](const ExperimentConfig& c) { return to_string(c.model.kind); },
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.model.kind = parse_cell_kind(v);
            }},
      SIZE_FIELD("input_channels", model.input_channels),
      Field{"channels", [](const ExperimentConfig& c) { return join(c.model.channels); },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.model.channels = to_list(k, v);
            }},
      Field{"skips",
            [](const ExperimentConfig& c) {
              std::string out;
              for (std::size_t i = 0; i < c.model.skips.size(); ++i)
                out += (i ? "," : "") + std::to_string(c.model.skips[i].first) + ">" +
                       std::to_string(c.model.skips[i].second);
              return out;
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.model.skips.clear();
              if (v.empty()) return;
              for (const auto& item : split(v, ',')) {
                const auto gt = item.find('>');
                if (gt == std::string::npos)
                  throw ConfigError(k + ": expected source>target pairs, got '" + item + "'");
                c.model.skips.emplace_back(to_size(k, trim(item.substr(0, gt))),
                                           to_size(k, trim(item.substr(gt + 1))));
              }
            }},
      SIZE_FIELD("kernel", model.kernel),
      BOOL_FIELD("bias", model.bias),
      BOOL_FIELD("forget_bias_one", model.forget_bias_one),
      Field{"padding",
            [](const ExperimentConfig& c) {
              return std::string(c.model.options.pad == PadMode::kZeroSame ? "zero" : "circular");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "zero") c.model.options.pad = PadMode::kZeroSame;
              else if (v == "circular") c.model.options.pad = PadMode::kCircularSame;
              else throw ConfigError(k + ": expected zero or circular, got '" + v + "'");
            }},
      BOOL_FIELD("legacy_cell_update", model.options.legacy_cell_update),
      BOOL_FIELD("sigmoid_output", model.options.sigmoid_output),
      SIZE_FIELD("order", model.order),
      SIZE_FIELD("steps", model.steps),
      Field{"ranks", [](const ExperimentConfig& c) { return join(c.model.ranks); },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.model.ranks = to_list(k, v);
            }},
      Field{"window",
            [](const ExperimentConfig& c) {
              return std::string(c.model.window == WindowMode::kSliding ? "sliding" : "fixed");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "sliding") c.model.window = WindowMode::kSliding;
              else if (v == "fixed") c.model.window = WindowMode::kFixed;
              else throw ConfigError(k + ": expected sliding or fixed, got '" + v + "'");
            }},
      Field{"algorithm",
            [](const ExperimentConfig& c) {
              return std::string(c.model.algorithm == CttAlgorithm::kLinear ? "linear" : "naive");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "linear") c.model.algorithm = CttAlgorithm::kLinear;
              else if (v == "naive") c.model.algorithm = CttAlgorithm::kNaive;
              else throw ConfigError(k + ": expected linear or naive, got '" + v + "'");
            }},
      SIZE_FIELD("tt_order", model.tt_order),
      SIZE_FIELD("tt_rank", model.tt_rank),
      BOOL_FIELD("head_sigmoid", model.head_sigmoid),
      // training
      DOUBLE_FIELD("learning_rate", train.learning_rate),
      DOUBLE_FIELD("clip_value", train.clip_value),
      DOUBLE_FIELD("beta1", train.beta1),
      DOUBLE_FIELD("beta2", train.beta2),
      DOUBLE_FIELD("epsilon", train.epsilon),
      SIZE_FIELD("batch_size", train.batch_size),
      SIZE_FIELD("epochs", train.epochs),
      SIZE_FIELD("steps_per_epoch", train.steps_per_epoch),
      SIZE_FIELD("val_limit", train.val_limit),
      SIZE_FIELD("context_len", train.context_len),
      SIZE_FIELD("horizon", train.horizon),
      SIZE_FIELD("ss_patience", train.ss_patience),
      SIZE_FIELD("ss_decay_length", train.ss_decay_length),
      DOUBLE_FIELD("lr_decay", train.lr_decay),
      SIZE_FIELD("lr_patience", train.lr_patience),
      SIZE_FIELD("seed", train.seed),
      SIZE_FIELD("threads", train.threads),
      // data
      SIZE_FIELD("canvas", data.generator.canvas),
      SIZE_FIELD("num_sprites", data.generator.num_sprites),
      DOUBLE_FIELD("speed_min", data.generator.speed_min),
      DOUBLE_FIELD("speed_max", data.generator.speed_max),
      Field{"sprites", [](const ExperimentConfig& c) { return c.data.sprites; },
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.sprites = v; }},
      Field{"idx_path", [](const ExperimentConfig& c) { return c.data.idx_path; },
            [](ExperimentConfig& c, const std::string&, const std::string& v) { c.data.idx_path = v; }},
      SIZE_FIELD("sprite_size", data.sprite_size),
      SIZE_FIELD("sequence_length", data.sequence_length),
      SIZE_FIELD("train_count", data.train_count),
      SIZE_FIELD("val_count", data.val_count),
      SIZE_FIELD("test_count", data.test_count),
      SIZE_FIELD("data_seed", data.seed),
  };
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return &f;
  return nullptr;
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  f->set(c, key, value);
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(n) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (!seen.insert(key).second)
      throw ConfigError("line " + std::to_string(n) + ": duplicate key '" + key + "'");
    try {
      set_config_value(c, key, trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const ExperimentConfig& c) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(c) + "\n";
  return out;
}

}  // namespace cttl
