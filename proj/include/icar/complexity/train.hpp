#pragma once

#include "icar/complexity/model.hpp"
#include "icar/synthdata/dataset.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace icar::complexity {

struct ComplexityTrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double lr = 2e-3;  // cosine-decayed per epoch to lr * min_lr_ratio
  double min_lr_ratio = 0.05;
  double weight_decay = 1e-4;
  int patience = 6;  // epochs without val improvement before stopping; 0 disables
  bool flip = true;
  bool crop = false;    // random shift by up to 2 px, edge-replicated
  bool jitter = false;  // per-channel gain in [0.9, 1.1]
  double threshold = 0.5;
  std::uint64_t seed = 3;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainHistory {
  std::string metric;  // "f1" (binary) or "pcc" (regression)
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_metric = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Minimizes cross-entropy (binary) or MSE on sigmoid scores (regression). The
// parameters of the best validation epoch are restored before returning.
// A non-finite loss aborts with DivergenceError naming epoch and step.
TrainHistory train_complexity(ComplexityModel& model, std::span<const synth::SceneSample* const> train,
                              std::span<const synth::SceneSample* const> val, const ComplexityTrainConfig& config,
                              const EpochCallback& on_epoch = {});

// Validation metric used for early stopping: F1 at `threshold` or PCC.
double validation_metric(const ComplexityModel& model, std::span<const synth::SceneSample* const> samples,
                         double threshold);

// Horizontal mirror of a 3 x S x S image.
Tensor flip_horizontal(const Tensor& image);
// Translation by (dy, dx) pixels; vacated pixels repeat the nearest edge.
Tensor shift_image(const Tensor& image, int dy, int dx);

}  // namespace icar::complexity
