#include "icar/synthdata/dataset.hpp"

#include "icar/error.hpp"
#include "icar/rng.hpp"
#include "icar/synthdata/ppm.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

namespace icar::synth {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kNone: break;
  }
  return "none";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  if (name == "none") return Split::kNone;
  throw ContractError("unknown split '" + std::string(name) + "'");
}

void GeneratorConfig::validate() const {
  if (n_samples < 1) throw ContractError("n_samples must be at least 1");
  if (image_size != 16 && image_size != 32 && image_size != 64) {
    throw ContractError("image_size must be one of 16, 32, 64");
  }
  if (max_objects < 1 || max_objects > kMaxObjects) {
    throw ContractError("max_objects must lie in [1, " + std::to_string(kMaxObjects) + "]");
  }
}

std::vector<const SceneSample*> Dataset::split(Split s) const {
  std::vector<const SceneSample*> out;
  for (const auto& sample : samples)
    if (sample.split == s) out.push_back(&sample);
  return out;
}

std::vector<SceneSpec> generate_specs(const GeneratorConfig& config) {
  config.validate();
  constexpr int kMaxAttempts = 10000;
  std::vector<SceneSpec> specs;
  specs.reserve(static_cast<std::size_t>(config.n_samples));
  std::unordered_set<std::string> captions;
  for (int id = 0; id < config.n_samples; ++id) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxAttempts) {
        throw ContractError("cannot draw " + std::to_string(config.n_samples) +
                            " scenes with distinct captions at max_objects=" + std::to_string(config.max_objects));
      }
      SceneSpec spec = sample_scene(derive_seed(config.seed, static_cast<std::uint64_t>(id),
                                                static_cast<std::uint64_t>(attempt)),
                                    config.max_objects);
      if (captions.insert(caption_text(spec)).second) {
        specs.push_back(std::move(spec));
        break;
      }
    }
  }
  return specs;
}

Dataset generate_dataset(const GeneratorConfig& config) {
  Dataset ds;
  ds.config = config;
  const auto specs = generate_specs(config);
  const auto& vocab = Vocabulary::instance();
  ds.samples.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const SceneSpec& spec = specs[i];
    SceneSample s;
    s.instance_id = i;
    s.image = render(spec, config.image_size);
    s.tokens = vocab.encode(caption_words(spec));
    s.text = caption_text(spec);
    s.score = complexity_score(spec.object_count, spec.background_noise, config.max_objects);
    s.complex = is_complex(s.score);
    s.category_id = category_id(spec);
    char name[32];
    std::snprintf(name, sizeof name, "images/%06zu.ppm", i);
    s.path = name;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset generate_dataset(const GeneratorConfig& config, const fs::path& out_dir) {
  Dataset ds = generate_dataset(config);
  write_dataset(ds, out_dir);
  return ds;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, std::array<double, 3> ratios) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("split ratios must sum to 1");
  for (double r : ratios)
    if (r < 0) throw ContractError("split ratios must be nonnegative");
  const auto train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  if (train + val >= n || train < 1 || val < 1) {
    throw ContractError("split of " + std::to_string(n) + " samples leaves a part with fewer than 1 sample");
  }
  return {train, val, n - train - val};
}

void split_dataset(Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed) {
  const std::size_t n = dataset.samples.size();
  const auto sizes = split_sizes(n, ratios);

  std::array<std::vector<std::size_t>, 2> by_label;
  for (std::size_t i = 0; i < n; ++i) by_label[dataset.samples[i].complex ? 1 : 0].push_back(i);

  // Positives per split by largest remainder so that the three counts sum exactly.
  const std::size_t positives = by_label[1].size();
  std::array<std::size_t, 3> pos{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = static_cast<double>(positives) * static_cast<double>(sizes[s]) / static_cast<double>(n);
    pos[s] = static_cast<std::size_t>(std::floor(exact));
    remainder[s] = exact - static_cast<double>(pos[s]);
    assigned += pos[s];
  }
  while (assigned < positives) {
    int best = 0;
    for (int s = 1; s < 3; ++s)
      if (remainder[s] > remainder[best]) best = s;
    ++pos[best];
    remainder[best] = -1.0;
    ++assigned;
  }

  Rng rng(derive_seed(seed, "split"));
  for (auto& ids : by_label) shuffle(ids, rng);
  constexpr std::array<Split, 3> kSplits{Split::kTrain, Split::kVal, Split::kTest};
  std::array<std::size_t, 2> cursor{};
  for (int s = 0; s < 3; ++s) {
    const std::array<std::size_t, 2> take{sizes[s] - pos[s], pos[s]};
    for (int label = 0; label < 2; ++label) {
      for (std::size_t k = 0; k < take[label]; ++k) {
        dataset.samples[by_label[label][cursor[label]++]].split = kSplits[s];
      }
    }
  }
}

void write_manifest(const Dataset& dataset, const fs::path& root) {
  std::ofstream out(root / "manifest.jsonl", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest under " + root.string());
  ojson header;
  header["version"] = Dataset::kVersion;
  header["seed"] = dataset.config.seed;
  header["n"] = dataset.samples.size();
  header["image_size"] = dataset.config.image_size;
  header["max_objects"] = dataset.config.max_objects;
  out << header.dump() << '\n';
  for (const auto& s : dataset.samples) {
    ojson rec;
    rec["id"] = s.instance_id;
    rec["path"] = s.path;
    rec["tokens"] = s.tokens;
    rec["text"] = s.text;
    rec["score"] = s.score;
    rec["label"] = s.complex ? 1 : 0;
    rec["category"] = s.category_id;
    if (s.split == Split::kNone) {
      rec["split"] = nullptr;
    } else {
      rec["split"] = split_name(s.split);
    }
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed writing manifest under " + root.string());
}

void write_dataset(Dataset& dataset, const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  if (ec) throw std::runtime_error("cannot create output directory " + root.string() + ": " + ec.message());
  for (const auto& s : dataset.samples) write_ppm(root / s.path, s.image);
  write_manifest(dataset, root);
}

Dataset load_dataset(const fs::path& manifest_or_dir) {
  const fs::path manifest =
      fs::is_directory(manifest_or_dir) ? manifest_or_dir / "manifest.jsonl" : manifest_or_dir;
  const fs::path root = manifest.parent_path();
  std::ifstream in(manifest);
  if (!in) throw LoadError("manifest missing: " + manifest.string());

  Dataset ds;
  std::string line;
  std::size_t expected = 0;
  std::size_t line_no = 0;
  std::unordered_set<std::uint64_t> ids;
  try {
    if (!std::getline(in, line)) throw LoadError("empty manifest " + manifest.string());
    ++line_no;
    const auto header = nlohmann::json::parse(line);
    if (header.at("version").get<std::string>() != Dataset::kVersion) {
      throw LoadError("unsupported manifest version in " + manifest.string());
    }
    ds.config.seed = header.at("seed").get<std::uint64_t>();
    ds.config.image_size = header.at("image_size").get<int>();
    ds.config.max_objects = header.at("max_objects").get<int>();
    expected = header.at("n").get<std::size_t>();
    ds.config.n_samples = static_cast<int>(expected);

    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto rec = nlohmann::json::parse(line);
      SceneSample s;
      s.instance_id = rec.at("id").get<std::uint64_t>();
      if (!ids.insert(s.instance_id).second) {
        throw LoadError("duplicate id " + std::to_string(s.instance_id) + " in " + manifest.string());
      }
      s.path = rec.at("path").get<std::string>();
      s.tokens = rec.at("tokens").get<std::vector<int>>();
      s.text = rec.at("text").get<std::string>();
      s.score = rec.at("score").get<double>();
      s.complex = rec.at("label").get<int>() == 1;
      s.category_id = rec.at("category").get<std::uint64_t>();
      const auto& split = rec.at("split");
      s.split = split.is_null() ? Split::kNone : parse_split(split.get<std::string>());
      if (s.complex != is_complex(s.score)) {
        throw LoadError("label of id " + std::to_string(s.instance_id) + " disagrees with its score");
      }
      s.image = read_ppm(root / s.path, ds.config.image_size);
      ds.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("invalid manifest " + manifest.string() + " line " + std::to_string(line_no) + ": " +
                    e.what());
  }
  if (ds.samples.size() != expected) {
    throw LoadError("manifest " + manifest.string() + " lists " + std::to_string(ds.samples.size()) +
                    " records, header says " + std::to_string(expected));
  }
  return ds;
}

}  // namespace icar::synth
