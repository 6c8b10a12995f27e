#include "icar/cli/app.hpp"

#include "icar/cli/config.hpp"
#include "icar/complexity/metrics.hpp"
#include "icar/encoders/icar_model.hpp"
#include "icar/encoders/routed.hpp"
#include "icar/error.hpp"
#include "icar/retrieval/index.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace icar::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config_path;
  std::string out = "out";
  bool force = false;
  bool quiet = false;
};

// A flag that, when given, overrides one config key.
struct Override {
  CLI::Option* option = nullptr;
  std::string key;
  std::string value;
};

class Context {
 public:
  Context(const Globals& g, RunConfig cfg, std::ostream& out) : globals(g), config(std::move(cfg)), out_(out) {}

  std::ostream& log() {
    if (globals.quiet) return null_;
    return out_;
  }

  // Creates the output directory, refusing a non-empty one without --force.
  fs::path prepare_out() const {
    const fs::path dir = globals.out;
    if (fs::exists(dir)) {
      if (!fs::is_directory(dir)) throw ContractError("--out " + dir.string() + " exists and is not a directory");
      if (!fs::is_empty(dir) && !globals.force) {
        throw ContractError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
      }
    }
    fs::create_directories(dir);
    return dir;
  }

  std::string hash_comment(const std::string& command) const {
    return "config_hash=" + config.hash_hex() + " command=" + command;
  }

  Globals globals;
  RunConfig config;

 private:
  std::ostream& out_;
  std::ostringstream null_;
};

std::ofstream open_report(const fs::path& path, const std::string& comment) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# " << comment << "\n";
  return f;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::vector<const Tensor*> images_of(std::span<const synth::SceneSample* const> samples) {
  std::vector<const Tensor*> out;
  for (auto* s : samples) out.push_back(&s->image);
  return out;
}

std::vector<const synth::SceneSample*> require_split(const synth::Dataset& ds, synth::Split split) {
  auto v = ds.split(split);
  if (v.empty()) throw ContractError("dataset has no " + std::string(synth::split_name(split)) + " samples");
  return v;
}

synth::Dataset load_data(const std::string& dir) {
  if (dir.empty()) throw ContractError("--data is required");
  return synth::load_dataset(dir);
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ContractError(what + " is required");
  if (!fs::exists(path)) throw ContractError(what + " " + path + " does not exist");
}

// ---------------------------------------------------------------- gen-data

void cmd_gen_data(Context& ctx) {
  const fs::path dir = ctx.prepare_out();
  auto ds = synth::generate_dataset(ctx.config.data);
  synth::split_dataset(ds, ctx.config.split_ratios, ctx.config.split_seed);
  synth::write_dataset(ds, dir);

  std::map<synth::Split, std::array<int, 2>> counts;
  std::array<int, 2> total{};
  for (const auto& s : ds.samples) {
    ++counts[s.split][s.complex];
    ++total[s.complex];
  }
  auto& log = ctx.log();
  log << "generated " << ds.samples.size() << " samples in " << dir.string() << " (simple " << total[0]
      << ", complex " << total[1] << ")\n";
  for (auto split : {synth::Split::kTrain, synth::Split::kVal, synth::Split::kTest}) {
    const auto c = counts[split];
    log << "  " << synth::split_name(split) << ": " << c[0] + c[1] << " (simple " << c[0] << ", complex " << c[1]
        << ")\n";
  }
}

// ------------------------------------------------------- train-complexity

void cmd_train_complexity(Context& ctx, const std::string& data_dir) {
  const auto ds = load_data(data_dir);
  if (ds.config.image_size != ctx.config.complexity_model.image_size) {
    throw ContractError("dataset image size " + std::to_string(ds.config.image_size) +
                        " does not match complexity.image_size " +
                        std::to_string(ctx.config.complexity_model.image_size));
  }
  const auto train = require_split(ds, synth::Split::kTrain);
  const auto val = require_split(ds, synth::Split::kVal);
  const auto test = require_split(ds, synth::Split::kTest);
  const fs::path dir = ctx.prepare_out();

  complexity::ComplexityModel model(ctx.config.complexity_model);
  auto& log = ctx.log();
  const auto history = complexity::train_complexity(
      model, train, val, ctx.config.complexity_train, [&](const complexity::EpochRecord& r) {
        log << "epoch " << r.epoch << " loss " << fixed(r.train_loss, 5) << " val " << fixed(r.val_metric) << "\n";
      });
  model.save(dir / "complexity.ckpt");

  {
    auto f = open_report(dir / "complexity_history.csv", ctx.hash_comment("train-complexity"));
    f << "epoch,train_loss,val_" << (history.metric.empty() ? "metric" : history.metric) << "\n";
    for (const auto& r : history.epochs) f << r.epoch << "," << fixed(r.train_loss, 6) << "," << fixed(r.val_metric, 6) << "\n";
  }

  const auto scores = complexity::score_images(model, images_of(test));
  auto f = open_report(dir / "complexity_metrics.csv", ctx.hash_comment("train-complexity"));
  f << "head,split,metric,value\n";
  const std::string head(complexity::head_name(model.config().head));
  auto row = [&](const std::string& metric, const std::string& value) {
    f << head << ",test," << metric << "," << value << "\n";
    log << "test " << metric << " " << value << "\n";
  };
  if (model.config().head == complexity::HeadType::kBinary) {
    std::vector<bool> labels;
    for (auto* s : test) labels.push_back(s->complex);
    const auto m = complexity::eval_binary(scores, labels, ctx.config.complexity_train.threshold);
    row("precision", fixed(m.precision));
    row("recall", fixed(m.recall));
    row("f1", fixed(m.f1));
    row("roc_auc", m.roc_auc ? fixed(*m.roc_auc) : "n/a");
  } else {
    std::vector<double> targets;
    for (auto* s : test) targets.push_back(s->score);
    try {
      const auto m = complexity::eval_regression(scores, targets);
      row("pcc", fixed(m.pcc));
      row("srcc", fixed(m.srcc));
      row("rmse", fixed(m.rmse));
    } catch (const UndefinedMetricError&) {
      // constant predictions, e.g. an untrained model
      row("pcc", "n/a");
      row("srcc", "n/a");
      double se = 0;
      for (std::size_t i = 0; i < scores.size(); ++i) se += (scores[i] - targets[i]) * (scores[i] - targets[i]);
      row("rmse", fixed(std::sqrt(se / static_cast<double>(scores.size()))));
    }
  }
}

// ------------------------------------------------------------- train-icar

void cmd_train_icar(Context& ctx, const std::string& data_dir, const std::string& router_path) {
  const auto& cfg = ctx.config;
  const bool routed = cfg.training.exit_rule == train::ExitRule::kRouted;
  if (routed) require_file(router_path, "--complexity checkpoint (needed by the routed exit rule)");
  const auto ds = load_data(data_dir);
  const auto train_set = require_split(ds, synth::Split::kTrain);
  const auto val = require_split(ds, synth::Split::kVal);
  std::optional<complexity::ComplexityModel> router;
  if (routed) router.emplace(complexity::ComplexityModel::load(router_path));
  const fs::path dir = ctx.prepare_out();

  enc::IcarModel model(cfg.vision, cfg.text);
  auto& log = ctx.log();
  train::TrainLoopOptions opts;
  opts.on_epoch = [&](const train::HistoryRow& r) {
    log << "epoch " << r.epoch << " loss " << fixed(r.loss_total, 5) << " val R@1 early " << fixed(r.val_r1_early)
        << " full " << fixed(r.val_r1_full) << "\n";
  };
  const auto result = train::train_loop(model, router ? &*router : nullptr, train_set, val, cfg.training, opts);
  model.save(dir / "icar.ckpt");
  train::write_history_csv(dir / "history.csv", result.history, ctx.hash_comment("train-icar"));
  log << "best epoch " << result.best_epoch << "; wrote " << (dir / "icar.ckpt").string() << "\n";
}

// ------------------------------------------------------------------- eval

struct VariantSpec {
  std::string label;
  int exit = 0;  // 0 = full depth
};

std::vector<VariantSpec> parse_variants(const std::vector<std::string>& names, const enc::VisionEncoderConfig& v,
                                        bool routed) {
  std::string valid = "full";
  for (int k : v.exit_layers)
    if (k != v.depth) valid += ", " + std::to_string(k);
  std::vector<VariantSpec> out;
  for (const auto& n : names) {
    if (n == "full") {
      out.push_back({"full", 0});
      continue;
    }
    int k = 0;
    const auto [ptr, ec] = std::from_chars(n.data(), n.data() + n.size(), k);
    if (ec != std::errc{} || ptr != n.data() + n.size() || !v.is_exit(k) || k == v.depth) {
      throw ContractError("unknown variant '" + n + "'; valid variants: " + valid);
    }
    out.push_back({(routed ? "icar-" : "fixed-") + std::to_string(k) + "/" + std::to_string(v.depth), k});
  }
  return out;
}

void cmd_eval(Context& ctx, const std::string& data_dir, const std::string& ckpt, const std::string& router_path,
              std::vector<std::string> variant_names, const std::string& split_name) {
  require_file(ckpt, "--checkpoint");
  if (!router_path.empty()) require_file(router_path, "--complexity checkpoint");
  const auto model = enc::IcarModel::load(ckpt);
  const auto& vc = model.vision.config();
  if (variant_names.empty()) variant_names = {"full", std::to_string(ctx.config.training.early_exit)};
  const auto variants = parse_variants(variant_names, vc, !router_path.empty());

  const auto ds = load_data(data_dir);
  const auto split = synth::parse_split(split_name);
  const auto samples = require_split(ds, split);
  std::optional<complexity::ComplexityModel> router;
  if (!router_path.empty()) router.emplace(complexity::ComplexityModel::load(router_path));
  const fs::path dir = ctx.prepare_out();

  const auto images = images_of(samples);
  std::vector<std::vector<int>> captions;
  std::vector<retrieval::Id> ids;
  std::vector<std::uint64_t> cats;
  for (auto* s : samples) {
    captions.push_back(s->tokens);
    ids.push_back(s->instance_id);
    cats.push_back(s->category_id);
  }
  const Matrix queries = enc::encode_texts(model.text, captions);

  std::unordered_map<retrieval::Id, retrieval::Id> truth;
  std::unordered_map<std::uint64_t, std::unordered_set<retrieval::Id>> by_cat;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    truth[ids[i]] = ids[i];
    by_cat[cats[i]].insert(ids[i]);
  }
  std::unordered_map<retrieval::Id, std::unordered_set<retrieval::Id>> relevance;
  for (std::size_t i = 0; i < ids.size(); ++i) relevance[ids[i]] = by_cat[cats[i]];

  std::size_t depth = 1;
  for (int k : ctx.config.recall_k) depth = std::max(depth, static_cast<std::size_t>(k));
  for (int k : ctx.config.map_k) depth = std::max(depth, static_cast<std::size_t>(k));

  std::vector<complexity::RoutingDecision> decisions;
  if (router) decisions = enc::route_images(*router, images, ctx.config.training.routing_threshold, 0);

  auto f = open_report(dir / "eval.csv", ctx.hash_comment("eval"));
  f << "variant,dataset,metric,k,value\n";
  const std::string dataset = "synth-" + split_name;
  std::map<std::string, std::vector<double>> scores;
  auto& log = ctx.log();
  for (const auto& v : variants) {
    Matrix emb;
    std::vector<int> prov;
    if (v.exit == 0) {
      emb = enc::encode_images_at_exit(model.vision, images, vc.depth);
      prov.assign(images.size(), vc.depth);
    } else if (router) {
      auto rb = enc::encode_images_routed(model.vision, decisions, images, v.exit);
      emb = std::move(rb.embeddings);
      prov = std::move(rb.layers_used);
    } else {
      emb = enc::encode_images_at_exit(model.vision, images, v.exit);
      prov.assign(images.size(), v.exit);
    }
    const auto index = retrieval::EmbeddingIndex::build(std::move(emb), ids, cats, prov);
    const auto results = retrieval::search_batch(index, queries, ids, depth);
    auto& vs = scores[v.label];
    for (int k : ctx.config.recall_k) {
      const double r = retrieval::recall_at_k(results, truth, static_cast<std::size_t>(k));
      vs.push_back(r);
      f << v.label << "," << dataset << ",R," << k << "," << fixed(r) << "\n";
      log << v.label << " R@" << k << " " << fixed(r, 2) << "\n";
    }
    for (int k : ctx.config.map_k) {
      const double m = retrieval::map_at_k(results, relevance, static_cast<std::size_t>(k));
      vs.push_back(m);
      f << v.label << "," << dataset << ",mAP," << k << "," << fixed(m) << "\n";
      log << v.label << " mAP@" << k << " " << fixed(m, 2) << "\n";
    }
  }
  if (scores.count("full")) {
    for (const auto& v : variants) {
      if (v.exit == 0) continue;
      const double r = retrieval::rsum_retention(scores[v.label], scores["full"]);
      f << v.label << "," << dataset << ",rsum_retention,all," << fixed(r) << "\n";
      log << v.label << " RSUM retention " << fixed(r, 2) << "%\n";
    }
  }
}

// ------------------------------------------------------------ cost-report

void cmd_cost_report(Context& ctx, std::vector<int> exits) {
  const auto& p = ctx.config.cost;
  if (exits.empty()) {
    for (int k : {8, 12, 16, 20})
      if (k <= p.vision_layers) exits.push_back(k);
  }
  const fs::path dir = ctx.prepare_out();
  auto f = open_report(dir / "cost_report.csv", ctx.hash_comment("cost-report"));
  auto& log = ctx.log();
  f << "variant,exit_layer,expected_gflops,speedup_estimate\n";
  const std::string layers = std::to_string(p.vision_layers);
  for (int k : exits) {
    const double g = cost::expected_gflops(p, k);
    const double s = cost::speedup_estimate(p, k);
    f << "icar-" << k << "/" << layers << "," << k << "," << fixed(g) << "," << fixed(s) << "\n";
    log << "ICAR-" << k << "/" << layers << ": " << fixed(g, 2) << " GFLOPs, est. speedup " << fixed(s, 3) << "x\n";
  }
  const double b = cost::baseline_gflops(p);
  f << "baseline," << layers << "," << fixed(b) << "," << fixed(1.0) << "\n";
  log << "baseline: " << fixed(b, 2) << " GFLOPs\n";

  const auto pr = cost::production_projection(ctx.config.projection);
  f << "# projection\nquantity,value\n";
  const std::pair<const char*, double> rows[] = {{"daily_gpu_hours", pr.daily_gpu_hours},
                                                 {"daily_gpu_hours_saved", pr.daily_gpu_hours_saved},
                                                 {"annual_kwh", pr.annual_kwh},
                                                 {"annual_kwh_saved", pr.annual_kwh_saved},
                                                 {"annual_co2_tonnes_saved", pr.annual_co2_tonnes_saved}};
  for (auto [name, v] : rows) {
    f << name << "," << fixed(v) << "\n";
    log << name << " " << fixed(v, 2) << "\n";
  }
}

// ------------------------------------------------------------------ bench

void cmd_bench(Context& ctx, const std::string& data_dir, const std::string& ckpt, const std::string& router_path,
               int exit, int repeats, int warmup, int limit, const std::string& split_name) {
  require_file(ckpt, "--checkpoint");
  require_file(router_path, "--complexity checkpoint");
  const auto model = enc::IcarModel::load(ckpt);
  const auto router = complexity::ComplexityModel::load(router_path);
  const auto& vc = model.vision.config();
  if (exit == 0) exit = ctx.config.training.early_exit;
  if (!vc.is_exit(exit)) throw ContractError("--exit " + std::to_string(exit) + " is not an exit layer of the model");
  const auto ds = load_data(data_dir);
  auto samples = ds.split(synth::parse_split(split_name));
  if (limit > 0 && static_cast<std::size_t>(limit) < samples.size()) samples.resize(static_cast<std::size_t>(limit));
  if (samples.empty()) throw ContractError("bench: empty dataset");
  const fs::path dir = ctx.prepare_out();

  cost::ThroughputConfig tc;
  tc.repeats = repeats;
  tc.warmup = warmup;
  const double thr = ctx.config.training.routing_threshold;
  const auto full = cost::measure_throughput(
      [&](std::size_t i) {
        enc::encode_image_full(model.vision, samples[i]->image);
        return vc.depth;
      },
      samples.size(), tc);
  const auto routed = cost::measure_throughput(
      [&](std::size_t i) {
        return enc::encode_image_routed(model.vision, router, samples[i]->image, exit, thr, samples[i]->instance_id)
            .layers_used;
      },
      samples.size(), tc);

  auto spread = [&](const cost::ThroughputReport& r) {
    return repeats < 2 ? std::string("n/a") : fixed(100.0 * (r.max_img_per_s - r.min_img_per_s) / r.median_img_per_s, 2);
  };
  auto f = open_report(dir / "bench.csv", ctx.hash_comment("bench"));
  f << "variant,exit_layer,images,repeats,median_img_per_s,min_img_per_s,max_img_per_s,spread_pct,speedup_vs_full\n";
  const std::string routed_label = "icar-" + std::to_string(exit) + "/" + std::to_string(vc.depth);
  auto row = [&](const std::string& label, int k, const cost::ThroughputReport& r) {
    const double speedup = r.median_img_per_s / full.median_img_per_s;
    f << label << "," << k << "," << samples.size() << "," << repeats << "," << fixed(r.median_img_per_s, 2) << ","
      << fixed(r.min_img_per_s, 2) << "," << fixed(r.max_img_per_s, 2) << "," << spread(r) << "," << fixed(speedup)
      << "\n";
    ctx.log() << label << ": " << fixed(r.median_img_per_s, 1) << " img/s (spread " << spread(r) << "), speedup "
              << fixed(speedup, 3) << "x\n";
  };
  row("full", vc.depth, full);
  row(routed_label, exit, routed);
  f << "# layers_used histogram\nvariant,layers,images\n";
  for (const auto& [layers, n] : full.layers_histogram) f << "full," << layers << "," << n << "\n";
  for (const auto& [layers, n] : routed.layers_histogram) f << routed_label << "," << layers << "," << n << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Image-complexity-aware retrieval: data, training, evaluation and cost tools", "icar"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_flag("--force", g.force, "Allow writing into a non-empty output directory");
  app.add_flag("--quiet", g.quiet, "Suppress progress output");
  std::vector<Override> overrides;
  auto over = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    overrides.push_back({nullptr, key, {}});
    overrides.back().option = sub->add_option(flag, overrides.back().value, help);
  };
  overrides.reserve(64);
  over(&app, "--seed", "run.seed", "Root seed; every component seed is derived from it");

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic image-caption dataset");
  over(gen, "--size", "data.size", "Number of samples");
  over(gen, "--image-size", "data.image_size", "Image side in pixels");
  over(gen, "--max-objects", "data.max_objects", "Maximum objects per scene");

  std::string data_dir, router_path, ckpt, split = "test";
  auto* tc = app.add_subcommand("train-complexity", "Train the complexity classifier or regressor");
  tc->add_option("--data", data_dir, "Dataset directory or manifest");
  over(tc, "--head", "complexity.head", "binary | regression");
  over(tc, "--epochs", "complexity.epochs", "Training epochs");
  over(tc, "--threshold", "complexity.threshold", "Decision threshold");

  auto* ti = app.add_subcommand("train-icar", "Dual-path contrastive training of the retrieval model");
  ti->add_option("--data", data_dir, "Dataset directory or manifest");
  ti->add_option("--complexity", router_path, "Complexity checkpoint used for routing");
  over(ti, "--alpha", "training.alpha", "Weight of the early-exit loss");
  over(ti, "--epochs", "training.epochs", "Training epochs");
  over(ti, "--batch-size", "training.batch_size", "Pairs per batch");
  over(ti, "--exit-rule", "training.exit_rule", "routed | fixed");
  over(ti, "--early-exit", "training.early_exit", "Exit layer for simple images");

  std::vector<std::string> variants;
  auto* ev = app.add_subcommand("eval", "Text-to-image retrieval metrics per variant");
  ev->add_option("--data", data_dir, "Dataset directory or manifest");
  ev->add_option("--checkpoint", ckpt, "Retrieval model checkpoint");
  ev->add_option("--complexity", router_path, "Complexity checkpoint; enables routed variants");
  ev->add_option("--variant", variants, "full or an exit layer; repeatable");
  ev->add_option("--split", split, "train | val | test");

  std::vector<int> exits;
  auto* cr = app.add_subcommand("cost-report", "Expected GFLOPs, speedup estimates and production projection");
  cr->add_option("--exit", exits, "Exit layers to report; repeatable");
  over(cr, "--p-simple", "cost.p_simple", "Fraction of simple images");
  over(cr, "--vision-gflops", "cost.vision_total_gflops", "Full vision encoder cost");
  over(cr, "--vision-layers", "cost.vision_layers", "Vision encoder depth");
  over(cr, "--text-gflops", "cost.text_gflops", "Text encoder cost");
  over(cr, "--routing-gflops", "cost.routing_gflops", "Routing classifier cost");

  int bench_exit = 0, repeats = 3, warmup = 10, limit = 0;
  auto* bn = app.add_subcommand("bench", "Wall-clock throughput of routed versus full-depth encoding");
  bn->add_option("--data", data_dir, "Dataset directory or manifest");
  bn->add_option("--checkpoint", ckpt, "Retrieval model checkpoint");
  bn->add_option("--complexity", router_path, "Complexity checkpoint");
  bn->add_option("--exit", bench_exit, "Exit layer for simple images");
  bn->add_option("--repeats", repeats, "Timed repetitions")->check(CLI::PositiveNumber);
  bn->add_option("--warmup", warmup, "Untimed warmup images")->check(CLI::NonNegativeNumber);
  bn->add_option("--limit", limit, "Use at most this many images (0 = all)")->check(CLI::NonNegativeNumber);
  bn->add_option("--split", split, "train | val | test");

  for (auto* sub : {gen, tc, ti, ev, cr, bn}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!g.config_path.empty()) load_config_file(cfg, g.config_path);
    for (const auto& o : overrides)
      if (o.option->count() > 0) set_config_value(cfg, o.key, o.value);
    cfg.apply_root_seed();
    cfg.validate();
    Context ctx(g, std::move(cfg), out);

    if (gen->parsed()) cmd_gen_data(ctx);
    else if (tc->parsed()) cmd_train_complexity(ctx, data_dir);
    else if (ti->parsed()) cmd_train_icar(ctx, data_dir, router_path);
    else if (ev->parsed()) cmd_eval(ctx, data_dir, ckpt, router_path, variants, split);
    else if (cr->parsed()) cmd_cost_report(ctx, exits);
    else if (bn->parsed()) cmd_bench(ctx, data_dir, ckpt, router_path, bench_exit, repeats, warmup, limit, split);
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace icar::cli
