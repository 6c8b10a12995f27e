#include "icar/training/dual_path.hpp"

#include "icar/complexity/train.hpp"
#include "icar/encoders/routed.hpp"
#include "icar/error.hpp"
#include "icar/retrieval/index.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace icar::train {

std::string_view exit_rule_name(ExitRule r) { return r == ExitRule::kRouted ? "routed" : "fixed"; }

ExitRule parse_exit_rule(std::string_view name) {
  if (name == "routed") return ExitRule::kRouted;
  if (name == "fixed") return ExitRule::kFixed;
  throw ContractError("unknown exit rule '" + std::string(name) + "' (expected routed|fixed)");
}

void DualPathConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("training: alpha must lie in [0, 1]");
  if (!(temperature > 0.0)) throw ContractError("training: temperature must be positive");
  if (batch_size < 1) throw ContractError("training: batch_size must be >= 1");
  if (epochs < 0) throw ContractError("training: epochs must be >= 0");
  if (!(lr_backbone > 0.0) || lr_heads < lr_backbone) {
    throw ContractError("training: learning rates must satisfy lr_heads >= lr_backbone > 0");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ContractError("training: warmup_fraction must lie in [0, 1)");
  if (shift_augment < 0) throw ContractError("training: shift_augment must be >= 0");
  if (grad_clip < 0.0) throw ContractError("training: grad_clip must be >= 0");
  if (weight_decay < 0.0) throw ContractError("training: weight_decay must be >= 0");
  if (!(routing_threshold >= 0.0 && routing_threshold <= 1.0)) {
    throw ContractError("training: routing_threshold must lie in [0, 1]");
  }
}

Var clip_contrastive_loss(const Var& img, const Var& txt, double temperature) {
  if (!(temperature > 0.0)) throw ContractError("contrastive loss: temperature must be positive");
  if (img.rows() != txt.rows() || img.cols() != txt.cols()) {
    throw DimensionError("contrastive loss: image batch " + std::to_string(img.rows()) + "x" +
                         std::to_string(img.cols()) + " vs text batch " + std::to_string(txt.rows()) + "x" +
                         std::to_string(txt.cols()));
  }
  if (img.rows() < 1) throw ContractError("contrastive loss: empty batch");
  for (const Var* side : {&img, &txt}) {
    const Vector norms = side->value().rowwise().norm();
    for (Index i = 0; i < norms.size(); ++i) {
      if (!(std::abs(norms[i] - 1.0) <= 1e-6)) {
        throw ContractError("contrastive loss: row " + std::to_string(i) + " has norm " + std::to_string(norms[i]));
      }
    }
  }
  const Var logits = scale(matmul(img, transpose(txt)), 1.0 / temperature);
  std::vector<int> diag(static_cast<std::size_t>(img.rows()));
  std::iota(diag.begin(), diag.end(), 0);
  return scale(add(cross_entropy(logits, diag), cross_entropy(transpose(logits), diag)), 0.5);
}

DualPathForward dual_path_loss(Tape& tape, const enc::IcarModel& model, const Batch& batch,
                               const DualPathConfig& config, enc::CostCounter* counter) {
  config.validate();
  const std::size_t b = batch.images.size();
  if (b == 0 || batch.tokens.size() != b) throw DimensionError("dual_path_loss: images and captions differ in count");
  const int full_depth = model.vision.config().depth;
  if (!model.vision.config().is_exit(config.early_exit)) {
    throw ContractError("dual_path_loss: early exit " + std::to_string(config.early_exit) + " is not an exit layer");
  }
  DualPathForward f;
  const int exits[] = {config.early_exit, full_depth};
  const auto emb = model.vision.forward(tape, batch.images, exits, counter);
  f.full_embeddings = emb[1];
  if (config.exit_rule == ExitRule::kFixed) {
    f.early_embeddings = emb[0];
  } else {
    if (batch.simple.size() != b) throw DimensionError("dual_path_loss: routed rule needs one decision per pair");
    std::vector<Index> pick(b);
    for (std::size_t i = 0; i < b; ++i) pick[i] = batch.simple[i] ? static_cast<Index>(i) : static_cast<Index>(b + i);
    f.early_embeddings = gather_rows(concat_rows({emb[0], emb[1]}), std::move(pick));
  }
  f.text_embeddings = model.text.forward(tape, batch.tokens, counter);
  f.loss_early = clip_contrastive_loss(f.early_embeddings, f.text_embeddings, config.temperature);
  f.loss_full = clip_contrastive_loss(f.full_embeddings, f.text_embeddings, config.temperature);
  f.loss_total = add(scale(f.loss_early, config.alpha), scale(f.loss_full, 1.0 - config.alpha));
  return f;
}

DualPathForward dual_path_loss(Tape& tape, const enc::IcarModel& model, const complexity::ComplexityModel& router,
                               Batch batch, const DualPathConfig& config, enc::CostCounter* counter) {
  batch.simple.clear();
  for (const auto& d : enc::route_images(router, batch.images, config.routing_threshold))
    batch.simple.push_back(d.is_simple);
  return dual_path_loss(tape, model, batch, config, counter);
}

namespace {

std::vector<ParamGroup> make_groups(enc::IcarModel& model, const DualPathConfig& config) {
  ParamGroup backbone{{}, config.lr_backbone}, heads{{}, config.lr_heads};
  for (const auto& [name, t] : model.parameters()) {
    const bool head = enc::MiniViT::is_head_parameter(name) || enc::TextEncoder::is_head_parameter(name);
    (head ? heads : backbone).params.push_back(t);
  }
  return {backbone, heads};
}

AdamWConfig adam_config(const DualPathConfig& config) {
  AdamWConfig c;
  c.weight_decay = config.weight_decay;
  return c;
}

std::string similarity_stats(const Matrix& img, const Matrix& txt) {
  const Matrix s = img * txt.transpose();
  std::ostringstream os;
  os << "similarity " << s.rows() << "x" << s.cols() << " min " << s.minCoeff() << " max " << s.maxCoeff()
     << " mean " << s.mean() << " diag-mean " << s.diagonal().mean();
  return os.str();
}

}  // namespace

DualPathTrainer::DualPathTrainer(enc::IcarModel& model, const DualPathConfig& config)
    : model_(model), config_(config), optimizer_((config.validate(), make_groups(model, config)), adam_config(config)) {}

LossPair DualPathTrainer::step(const Batch& batch, enc::CostCounter* counter) {
  try {
    Tape tape;
    const DualPathForward f = dual_path_loss(tape, model_, batch, config_, counter);
    last_similarity_stats_ = similarity_stats(f.full_embeddings.value(), f.text_embeddings.value());
    optimizer_.zero_grad();
    tape.backward(f.loss_total);
    for (const auto& [name, t] : model_.parameters()) {
      if (t->has_grad() && !t->grad().allFinite()) throw DivergenceError("non-finite gradient for " + name);
    }
    if (config_.grad_clip > 0.0) optimizer_.clip_grad_norm(config_.grad_clip);
    optimizer_.step();
    return f.values();
  } catch (const DivergenceError& e) {
    throw DivergenceError(std::string("dual-path training diverged at step ") + std::to_string(optimizer_.steps() + 1) +
                          ": " + e.what() + "; last " +
                          (last_similarity_stats_.empty() ? std::string("similarity: none") : last_similarity_stats_));
  }
}

void DualPathTrainer::set_lr_scale(double scale) {
  optimizer_.set_lr(0, config_.lr_backbone * scale);
  optimizer_.set_lr(1, config_.lr_heads * scale);
}

double lr_schedule(const DualPathConfig& config, long step, long total) {
  const double warm = config.warmup_fraction * static_cast<double>(total);
  const double t = static_cast<double>(step) + 1.0;
  if (t <= warm) return t / warm;
  const double progress = (t - warm) / std::max(1.0, static_cast<double>(total) - warm);
  return 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, progress)));
}

PathRecall validation_recall(const enc::IcarModel& model, std::span<const synth::SceneSample* const> samples,
                             const std::vector<bool>& simple, const DualPathConfig& config) {
  std::vector<const Tensor*> images;
  std::vector<std::vector<int>> tokens;
  std::vector<retrieval::Id> ids;
  std::unordered_map<retrieval::Id, retrieval::Id> truth;
  for (const auto* s : samples) {
    images.push_back(&s->image);
    tokens.push_back(s->tokens);
    ids.push_back(s->instance_id);
    truth[s->instance_id] = s->instance_id;
  }
  const Matrix text = enc::encode_texts(model.text, tokens);
  const Matrix full = enc::encode_images_at_exit(model.vision, images, model.vision.config().depth);
  Matrix early;
  if (config.exit_rule == ExitRule::kFixed) {
    early = enc::encode_images_at_exit(model.vision, images, config.early_exit);
  } else {
    std::vector<complexity::RoutingDecision> decisions;
    for (std::size_t i = 0; i < samples.size(); ++i) decisions.push_back({ids[i], simple.at(i), 0.0, 0.0});
    early = enc::encode_images_routed(model.vision, decisions, images, config.early_exit).embeddings;
  }
  auto r1 = [&](const Matrix& emb) {
    const auto index = retrieval::EmbeddingIndex::build(emb, ids);
    const auto results = retrieval::search_batch(index, text, ids, 1);
    return retrieval::recall_at_k(results, truth, 1) / 100.0;
  };
  return {r1(early), r1(full)};
}

TrainLoopResult train_loop(enc::IcarModel& model, const complexity::ComplexityModel* router,
                           std::span<const synth::SceneSample* const> train,
                           std::span<const synth::SceneSample* const> val, const DualPathConfig& config,
                           const TrainLoopOptions& options) {
  config.validate();
  if (train.empty() || val.empty()) throw ContractError("train_loop needs nonempty train and val splits");
  if (config.exit_rule == ExitRule::kRouted && router == nullptr) {
    throw ContractError("train_loop: the routed exit rule needs a complexity model");
  }
  TrainLoopResult result;
  if (config.epochs == 0) return result;

  auto decide = [&](std::span<const synth::SceneSample* const> samples) {
    std::vector<bool> simple(samples.size(), false);
    if (config.exit_rule == ExitRule::kFixed) return simple;
    std::vector<const Tensor*> images;
    for (const auto* s : samples) images.push_back(&s->image);
    const auto d = enc::route_images(*router, images, config.routing_threshold);
    for (std::size_t i = 0; i < d.size(); ++i) simple[i] = d[i].is_simple;
    return simple;
  };
  const std::vector<bool> train_simple = decide(train);
  const std::vector<bool> val_simple = decide(val);

  DualPathTrainer trainer(model, config);
  auto params = model.parameters();
  std::vector<Vector> best;
  for (const auto& p : params) best.push_back(p.tensor->data());
  double best_score = -1.0;

  Rng rng(derive_seed(config.seed, "dual-path-order"));
  Rng aug_rng(derive_seed(config.seed, "dual-path-augment"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const long steps_per_epoch = static_cast<long>((train.size() + config.batch_size - 1) / config.batch_size);
  const long total_steps = steps_per_epoch * config.epochs;
  long global_step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    HistoryRow row;
    row.epoch = epoch;
    long steps = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      Batch batch;
      std::vector<Tensor> shifted;
      shifted.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        if (config.shift_augment > 0) {
          const auto span = static_cast<std::uint64_t>(2 * config.shift_augment + 1);
          const int dy = static_cast<int>(uniform_index(aug_rng, span)) - config.shift_augment;
          const int dx = static_cast<int>(uniform_index(aug_rng, span)) - config.shift_augment;
          shifted.push_back(complexity::shift_image(train[order[i]]->image, dy, dx));
          batch.images.push_back(&shifted.back());
        } else {
          batch.images.push_back(&train[order[i]]->image);
        }
        batch.tokens.push_back(train[order[i]]->tokens);
        batch.simple.push_back(train_simple[order[i]]);
      }
      trainer.set_lr_scale(lr_schedule(config, global_step++, total_steps));
      const LossPair lp = trainer.step(batch);
      row.loss_early += lp.loss_early;
      row.loss_full += lp.loss_full;
      row.loss_total += lp.loss_total;
      ++steps;
    }
    row.loss_early /= static_cast<double>(steps);
    row.loss_full /= static_cast<double>(steps);
    row.loss_total /= static_cast<double>(steps);
    const PathRecall r = validation_recall(model, val, val_simple, config);
    row.val_r1_early = r.early;
    row.val_r1_full = r.full;
    result.history.push_back(row);
    if (options.on_epoch) options.on_epoch(row);
    if (r.early + r.full > best_score) {
      best_score = r.early + r.full;
      result.best_epoch = epoch;
      for (std::size_t i = 0; i < params.size(); ++i) best[i] = params[i].tensor->data();
      if (options.best_checkpoint) model.save(*options.best_checkpoint);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor->data() = best[i];
  return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history,
                       const std::string& comment) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "epoch,loss_early,loss_full,loss_total,val_r1_early,val_r1_full\n" << std::setprecision(10);
  for (const auto& h : history) {
    out << h.epoch << ',' << h.loss_early << ',' << h.loss_full << ',' << h.loss_total << ',' << h.val_r1_early << ','
        << h.val_r1_full << '\n';
  }
}

}  // namespace icar::train
