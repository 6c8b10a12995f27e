#include "icar/cli/config.hpp"

#include "icar/error.hpp"
#include "icar/rng.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <sstream>

namespace icar::cli {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  std::string s = text;
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  if constexpr (std::is_floating_point_v<T>) {
    std::size_t used = 0;
    try {
      value = static_cast<T>(std::stod(s, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ContractError("config key " + key + ": '" + text + "' is not a number");
  } else {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
      throw ContractError("config key " + key + ": '" + text + "' is not an integer");
    }
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ContractError("config key " + key + ": '" + text + "' is not a boolean");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, item));
  if (out.empty()) throw ContractError("config key " + key + ": empty list");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

template <typename T>
ConfigField num(std::string name, T& ref) {
  return {name, [&ref, name](const std::string& s) { ref = parse_number<T>(name, s); },
          [&ref] {
            if constexpr (std::is_floating_point_v<T>) {
              return fmt(ref);
            } else {
              return std::to_string(ref);
            }
          }};
}

ConfigField flag(std::string name, bool& ref) {
  return {name, [&ref, name](const std::string& s) { ref = parse_bool(name, s); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

ConfigField int_list(std::string name, std::vector<int>& ref) {
  return {name, [&ref, name](const std::string& s) { ref = parse_int_list(name, s); }, [&ref] { return join(ref); }};
}

template <typename F>
void with_section(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ContractError& e) {
    throw ContractError("config [" + section + "]: " + e.what());
  }
}

}  // namespace

RunConfig::RunConfig() { complexity_train.epochs = 20; }

void RunConfig::apply_root_seed() {
  if (!root_seed) return;
  const std::uint64_t r = *root_seed;
  data.seed = derive_seed(r, "data");
  split_seed = derive_seed(r, "split");
  complexity_model.seed = derive_seed(r, "complexity-init");
  complexity_train.seed = derive_seed(r, "complexity-train");
  vision.seed = derive_seed(r, "vision-init");
  text.seed = derive_seed(r, "text-init");
  training.seed = derive_seed(r, "dual-path");
}

void RunConfig::validate() const {
  with_section("data", [&] {
    data.validate();
    double sum = 0;
    for (double x : split_ratios) {
      if (!(x > 0)) throw ContractError("split ratios must be positive");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("split ratios must sum to 1");
  });
  with_section("complexity", [&] {
    complexity_model.validate();
    complexity_train.validate();
    if (complexity_model.image_size != data.image_size) {
      throw ContractError("image_size must match data.image_size");
    }
  });
  with_section("model", [&] {
    vision.validate();
    text.validate();
    if (vision.embed_dim != text.embed_dim) throw ContractError("vision_embed_dim must equal text_embed_dim");
    if (vision.image_size != data.image_size) throw ContractError("vision_image_size must match data.image_size");
  });
  with_section("training", [&] {
    training.validate();
    if (!vision.is_exit(training.early_exit)) {
      throw ContractError("early_exit " + std::to_string(training.early_exit) + " is not a vision exit layer");
    }
  });
  with_section("eval", [&] {
    for (int k : recall_k)
      if (k < 1) throw ContractError("recall_k entries must be >= 1");
    for (int k : map_k)
      if (k < 1) throw ContractError("map_k entries must be >= 1");
  });
  with_section("cost", [&] {
    cost.validate();
    projection.validate();
  });
}

std::vector<ConfigField> config_fields(RunConfig& c) {
  std::vector<ConfigField> f;
  f.push_back({"run.seed", [&c](const std::string& s) { c.root_seed = parse_number<std::uint64_t>("run.seed", s); },
               [&c] { return c.root_seed ? std::to_string(*c.root_seed) : std::string("unset"); }});

  f.push_back(num("data.seed", c.data.seed));
  f.push_back(num("data.size", c.data.n_samples));
  f.push_back(num("data.image_size", c.data.image_size));
  f.push_back(num("data.max_objects", c.data.max_objects));
  f.push_back(num("data.train_ratio", c.split_ratios[0]));
  f.push_back(num("data.val_ratio", c.split_ratios[1]));
  f.push_back(num("data.test_ratio", c.split_ratios[2]));
  f.push_back(num("data.split_seed", c.split_seed));

  f.push_back({"complexity.head",
               [&c](const std::string& s) { c.complexity_model.head = complexity::parse_head(s); },
               [&c] { return std::string(complexity::head_name(c.complexity_model.head)); }});
  f.push_back(num("complexity.image_size", c.complexity_model.image_size));
  f.push_back(num("complexity.hidden", c.complexity_model.hidden));
  f.push_back(num("complexity.model_seed", c.complexity_model.seed));
  f.push_back(num("complexity.epochs", c.complexity_train.epochs));
  f.push_back(num("complexity.batch_size", c.complexity_train.batch_size));
  f.push_back(num("complexity.lr", c.complexity_train.lr));
  f.push_back(num("complexity.min_lr_ratio", c.complexity_train.min_lr_ratio));
  f.push_back(num("complexity.weight_decay", c.complexity_train.weight_decay));
  f.push_back(num("complexity.patience", c.complexity_train.patience));
  f.push_back(flag("complexity.flip", c.complexity_train.flip));
  f.push_back(flag("complexity.crop", c.complexity_train.crop));
  f.push_back(flag("complexity.jitter", c.complexity_train.jitter));
  f.push_back(num("complexity.threshold", c.complexity_train.threshold));
  f.push_back(num("complexity.train_seed", c.complexity_train.seed));

  f.push_back(num("model.vision_image_size", c.vision.image_size));
  f.push_back(num("model.patch_size", c.vision.patch_size));
  f.push_back(num("model.vision_depth", c.vision.depth));
  f.push_back(int_list("model.exit_layers", c.vision.exit_layers));
  f.push_back(num("model.vision_width", c.vision.width));
  f.push_back(num("model.vision_heads", c.vision.heads));
  f.push_back(num("model.vision_embed_dim", c.vision.embed_dim));
  f.push_back(num("model.vision_mlp_ratio", c.vision.mlp_ratio));
  f.push_back(num("model.vision_seed", c.vision.seed));
  f.push_back(num("model.text_width", c.text.width));
  f.push_back(num("model.text_heads", c.text.heads));
  f.push_back(num("model.text_depth", c.text.depth));
  f.push_back(num("model.text_max_len", c.text.max_len));
  f.push_back(num("model.text_embed_dim", c.text.embed_dim));
  f.push_back(num("model.text_mlp_ratio", c.text.mlp_ratio));
  f.push_back(num("model.text_seed", c.text.seed));

  auto& t = c.training;
  f.push_back(num("training.alpha", t.alpha));
  f.push_back(num("training.temperature", t.temperature));
  f.push_back(num("training.batch_size", t.batch_size));
  f.push_back(num("training.epochs", t.epochs));
  f.push_back(num("training.lr_backbone", t.lr_backbone));
  f.push_back(num("training.lr_heads", t.lr_heads));
  f.push_back(num("training.weight_decay", t.weight_decay));
  f.push_back(num("training.warmup_fraction", t.warmup_fraction));
  f.push_back(num("training.grad_clip", t.grad_clip));
  f.push_back(num("training.shift_augment", t.shift_augment));
  f.push_back(num("training.seed", t.seed));
  f.push_back({"training.exit_rule", [&t](const std::string& s) { t.exit_rule = train::parse_exit_rule(s); },
               [&t] { return std::string(train::exit_rule_name(t.exit_rule)); }});
  f.push_back(num("training.early_exit", t.early_exit));
  f.push_back(num("training.routing_threshold", t.routing_threshold));

  f.push_back(int_list("eval.recall_k", c.recall_k));
  f.push_back(int_list("eval.map_k", c.map_k));

  auto& p = c.cost;
  f.push_back(num("cost.vision_total_gflops", p.vision_total_gflops));
  f.push_back(num("cost.vision_layers", p.vision_layers));
  f.push_back(num("cost.text_gflops", p.text_gflops));
  f.push_back(num("cost.routing_gflops", p.routing_gflops));
  f.push_back({"cost.p_simple",
               [&p](const std::string& s) {
                 p.p_simple = parse_number<double>("cost.p_simple", s);
                 p.p_complex = 1.0 - p.p_simple;
               },
               [&p] { return fmt(p.p_simple); }});
  f.push_back({"cost.p_complex",
               [&p](const std::string& s) {
                 p.p_complex = parse_number<double>("cost.p_complex", s);
                 p.p_simple = 1.0 - p.p_complex;
               },
               [&p] { return fmt(p.p_complex); }});
  auto& q = c.projection;
  f.push_back(num("cost.daily_images", q.daily_images));
  f.push_back(num("cost.throughput_img_per_s", q.throughput_img_per_s));
  f.push_back(num("cost.gpu_power_kw", q.gpu_power_kw));
  f.push_back(num("cost.pue", q.pue));
  f.push_back(num("cost.days_per_year", q.days_per_year));
  f.push_back(num("cost.grid_intensity_kg_per_kwh", q.grid_intensity_kg_per_kwh));
  f.push_back(num("cost.savings_fraction", q.savings_fraction));
  return f;
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (auto& field : config_fields(config)) {
    if (field.name == key) {
      try {
        field.set(value);
      } catch (const ContractError& e) {
        const std::string msg = e.what();
        if (msg.find(key) != std::string::npos) throw;
        throw ContractError("config key " + key + ": " + msg);
      }
      return;
    }
  }
  throw ContractError("unknown config key '" + key + "'");
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw LoadError("config file " + path.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ContractError("config key '" + section + "' must sit inside a [section]");
    for (const auto& [key, value] : body) set_config_value(config, section + "." + key, value.get_value<std::string>());
  }
}

std::string RunConfig::canonical() const {
  auto& self = const_cast<RunConfig&>(*this);
  std::vector<std::string> lines;
  for (auto& f : config_fields(self)) lines.push_back(f.name + "=" + f.get());
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (auto& l : lines) out += l + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a(canonical()); }

std::string RunConfig::hash_hex() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash();
  return os.str();
}

}  // namespace icar::cli
