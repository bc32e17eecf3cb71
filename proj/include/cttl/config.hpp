// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
//
// Flat `key = value` experiment configuration. Lines starting with '#' are
// comments; unknown keys and malformed values raise ConfigError with the line
// number.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cttl/data.hpp"
#include "cttl/predictor.hpp"
#include "cttl/training.hpp"

namespace cttl {

struct DataConfig {
  GeneratorConfig generator;
  std::string sprites = "synthetic";  // synthetic | idx
  std::string idx_path;
  std::size_t sprite_size = 28;
  std::size_t sequence_length = 20;
  std::size_t train_count = 10000;
  std::size_t val_count = 3000;
  std::size_t test_count = 5000;
  std::uint64_t seed = 0;

  SpriteSource source() const;
  void validate() const;
  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct ExperimentConfig {
  PredictorConfig model;
  TrainConfig train;
  DataConfig data;

  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Canonical text; parse_config(render_config(c)) == c.
std::string render_config(const ExperimentConfig& c);

// Applies one `key = value` override.
void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value);

std::string to_string(CellKind k);
CellKind parse_cell_kind(const std::string& s);

}  // namespace cttl
