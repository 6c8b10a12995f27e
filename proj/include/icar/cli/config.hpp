#pragma once

#include "icar/complexity/model.hpp"
#include "icar/complexity/train.hpp"
#include "icar/costmodel/cost.hpp"
#include "icar/encoders/text.hpp"
#include "icar/encoders/vision.hpp"
#include "icar/synthdata/dataset.hpp"
#include "icar/training/dual_path.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace icar::cli {

// Every tunable of a run, grouped by the section names of the config file.
struct RunConfig {
  // When set, every component seed is derived from it by a stable label.
  std::optional<std::uint64_t> root_seed;

  synth::GeneratorConfig data;
  std::array<double, 3> split_ratios{0.70, 0.15, 0.15};
  std::uint64_t split_seed = 7;

  complexity::ComplexityModelConfig complexity_model;
  complexity::ComplexityTrainConfig complexity_train;

  enc::VisionEncoderConfig vision;
  enc::TextEncoderConfig text;
  train::DualPathConfig training;

  std::vector<int> recall_k{1, 5, 10};
  std::vector<int> map_k{10, 50, 100};

  cost::CostParams cost;
  cost::ProjectionParams projection;

  RunConfig();

  // Re-derives component seeds from root_seed; no-op when it is unset.
  void apply_root_seed();
  // Throws ContractError prefixed with the failing section.
  void validate() const;

  // Sorted "section.key=value" lines of every field.
  std::string canonical() const;
  // FNV-1a 64 of canonical().
  std::uint64_t hash() const;
  std::string hash_hex() const;
};

// One settable field of RunConfig, addressed as "section.key".
struct ConfigField {
  std::string name;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};
std::vector<ConfigField> config_fields(RunConfig& config);

// Assigns "section.key" from text; unknown keys and unparsable values throw
// ContractError naming the key.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

// INI-style file: [section] headers with key = value lines, '#' or ';' comments.
// Values not present keep their current setting.
void load_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace icar::cli
