#pragma once

#include "icar/synthdata/scene.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace icar::synth {

enum class Split { kNone, kTrain, kVal, kTest };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct GeneratorConfig {
  std::uint64_t seed = 7;
  int n_samples = 3000;
  int image_size = 32;
  int max_objects = 6;

  void validate() const;
};

struct SceneSample {
  std::uint64_t instance_id = 0;
  Tensor image;  // 3 x S x S in [0, 1]
  std::vector<int> tokens;
  std::string text;
  double score = 0.0;
  bool complex = false;
  std::uint64_t category_id = 0;
  Split split = Split::kNone;
  std::string path;  // relative to the dataset root
};

struct Dataset {
  static constexpr const char* kVersion = "icar-synth/1";

  GeneratorConfig config;
  std::vector<SceneSample> samples;

  std::vector<const SceneSample*> split(Split s) const;
};

// Scene specs in instance order. Captions are unique within the dataset: a
// scene whose caption repeats an earlier one is redrawn from the next stream.
std::vector<SceneSpec> generate_specs(const GeneratorConfig& config);
Dataset generate_dataset(const GeneratorConfig& config);
// generate_dataset followed by write_dataset.
Dataset generate_dataset(const GeneratorConfig& config, const std::filesystem::path& out_dir);

// Stratified by binary label; split sizes are round(ratio * n) for train and
// val, the remainder for test.
void split_dataset(Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed);
std::array<std::size_t, 3> split_sizes(std::size_t n, std::array<double, 3> ratios);

// Writes images/NNNNNN.ppm and manifest.jsonl under `root`.
void write_dataset(Dataset& dataset, const std::filesystem::path& root);
void write_manifest(const Dataset& dataset, const std::filesystem::path& root);
// Accepts either the dataset directory or the manifest path.
Dataset load_dataset(const std::filesystem::path& manifest_or_dir);

}  // namespace icar::synth
