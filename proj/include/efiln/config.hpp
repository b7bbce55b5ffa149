#pragma once

// Experiment configuration: one plain-text file of `key = value` lines.
// Blank lines and lines starting with '#' are ignored; unknown keys and
// duplicate keys are rejected. `electrode = x,y,z,q` may repeat; the first
// occurrence replaces the default electrode list.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "efiln/dataset.hpp"
#include "efiln/field_model.hpp"
#include "efiln/trainer.hpp"

namespace efiln {

struct ExperimentConfig {
  std::string profile = "desk";
  GridSpec grid = GridSpec::desk();
  std::vector<ElectrodeSystem> electrodes = default_electrodes();
  PhysicalConstants constants;
  double noise_intensity = 0.0;
  std::uint64_t noise_seed = 11;
  TrainConfig train;
  std::size_t eval_points = 200;
  std::uint64_t eval_seed = 5;
  std::uint64_t eval_noise_seed = 13;
  std::string output_dir = "runs/default";
  unsigned threads = 0;

  void validate() const;
};

struct ConfigKeyDoc {
  std::string key;
  std::string default_value;
  std::string description;
};

/// Every recognized key with its default.
const std::vector<ConfigKeyDoc>& config_keys();
std::string config_help();

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& c);

}  // namespace efiln
