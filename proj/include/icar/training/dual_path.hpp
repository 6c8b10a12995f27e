#pragma once

#include "icar/complexity/model.hpp"
#include "icar/encoders/icar_model.hpp"
#include "icar/numerics/optim.hpp"
#include "icar/synthdata/dataset.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace icar::train {

enum class ExitRule { kRouted, kFixed };
std::string_view exit_rule_name(ExitRule r);
ExitRule parse_exit_rule(std::string_view name);

struct DualPathConfig {
  double alpha = 0.5;
  double temperature = 0.07;
  int batch_size = 8;
  int epochs = 10;
  double lr_backbone = 5e-4;
  double lr_heads = 5e-3;
  double weight_decay = 0.1;
  double warmup_fraction = 0.1;  // linear warmup share of all steps, then cosine decay to zero
  double grad_clip = 1.0;        // global gradient-norm bound; 0 disables
  int shift_augment = 0;         // random translation of training images by up to this many pixels
  std::uint64_t seed = 5;
  ExitRule exit_rule = ExitRule::kRouted;
  int early_exit = 4;  // depth for simple images (routed) or every image (fixed)
  double routing_threshold = 0.5;

  void validate() const;
};

// Symmetric InfoNCE over the (B x B) matrix img * txt^T / tau with the diagonal
// as positives. Rows must be unit-norm within 1e-6.
Var clip_contrastive_loss(const Var& image_embeddings, const Var& text_embeddings, double temperature);

struct LossPair {
  double loss_early = 0.0;
  double loss_full = 0.0;
  double loss_total = 0.0;
};

struct Batch {
  std::vector<const Tensor*> images;
  std::vector<std::vector<int>> tokens;
  std::vector<bool> simple;  // routing decision per pair; unused by the fixed rule
};

struct DualPathForward {
  Var early_embeddings;
  Var full_embeddings;
  Var text_embeddings;
  Var loss_early;
  Var loss_full;
  Var loss_total;

  LossPair values() const { return {loss_early.scalar(), loss_full.scalar(), loss_total.scalar()}; }
};

// Early and full embeddings come from one vision pass; the text embeddings are
// computed once and shared by both loss terms.
//   loss_total = alpha * loss_early + (1 - alpha) * loss_full
DualPathForward dual_path_loss(Tape& tape, const enc::IcarModel& model, const Batch& batch,
                               const DualPathConfig& config, enc::CostCounter* counter = nullptr);
// Routes the batch with `router` first (routed rule only).
DualPathForward dual_path_loss(Tape& tape, const enc::IcarModel& model, const complexity::ComplexityModel& router,
                               Batch batch, const DualPathConfig& config, enc::CostCounter* counter = nullptr);

// AdamW with the projection heads at lr_heads and everything else at lr_backbone.
class DualPathTrainer {
 public:
  DualPathTrainer(enc::IcarModel& model, const DualPathConfig& config);

  // One update on loss_total. A non-finite value aborts with DivergenceError
  // carrying the last similarity-matrix statistics.
  LossPair step(const Batch& batch, enc::CostCounter* counter = nullptr);
  // Multiplies both base learning rates.
  void set_lr_scale(double scale);
  const AdamW& optimizer() const { return optimizer_; }

 private:
  enc::IcarModel& model_;
  DualPathConfig config_;
  AdamW optimizer_;
  std::string last_similarity_stats_;
};

struct HistoryRow {
  int epoch = 0;
  double loss_early = 0.0;
  double loss_full = 0.0;
  double loss_total = 0.0;
  double val_r1_early = 0.0;  // fractions in [0, 1]
  double val_r1_full = 0.0;
};

struct TrainLoopResult {
  std::vector<HistoryRow> history;
  int best_epoch = 0;  // 0 when no epoch ran
};

using HistoryCallback = std::function<void(const HistoryRow&)>;

struct TrainLoopOptions {
  std::optional<std::filesystem::path> best_checkpoint;  // written whenever validation improves
  HistoryCallback on_epoch;
};

// Learning-rate multiplier at `step` of `total` (0-based).
double lr_schedule(const DualPathConfig& config, long step, long total);

// Shuffled mini-batches for `epochs`; after each epoch, text-to-image R@1 on the
// validation pairs for the early and the full path. The model ends holding the
// parameters of the epoch with the best (early + full) validation R@1.
// Routing decisions are made once by the frozen router; it may be null for the fixed rule.
TrainLoopResult train_loop(enc::IcarModel& model, const complexity::ComplexityModel* router,
                           std::span<const synth::SceneSample* const> train,
                           std::span<const synth::SceneSample* const> val, const DualPathConfig& config,
                           const TrainLoopOptions& options = {});

struct PathRecall {
  double early = 0.0;
  double full = 0.0;
};
// Text-to-image R@1 (fraction) over matched pairs for both paths.
PathRecall validation_recall(const enc::IcarModel& model, std::span<const synth::SceneSample* const> samples,
                             const std::vector<bool>& simple, const DualPathConfig& config);

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history,
                       const std::string& comment = {});

}  // namespace icar::train
