#include "icar/complexity/train.hpp"

#include "icar/complexity/metrics.hpp"
#include "icar/error.hpp"
#include "icar/numerics/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace icar::complexity {

namespace {

Tensor augment(const Tensor& image, const ComplexityTrainConfig& cfg, Rng& rng) {
  Tensor out = image;
  if (cfg.flip && uniform_index(rng, 2) == 1) out = flip_horizontal(out);
  if (cfg.crop) {
    const int dy = static_cast<int>(uniform_index(rng, 5)) - 2;
    const int dx = static_cast<int>(uniform_index(rng, 5)) - 2;
    out = shift_image(out, dy, dx);
  }
  if (cfg.jitter) {
    const Index plane = image.dim(1) * image.dim(2);
    for (Index c = 0; c < 3; ++c) {
      const double gain = 0.9 + 0.2 * uniform_unit(rng);
      out.data().segment(c * plane, plane) = (out.data().segment(c * plane, plane) * gain).cwiseMin(1.0);
    }
  }
  return out;
}

}  // namespace

void ComplexityTrainConfig::validate() const {
  if (epochs < 0) throw ContractError("complexity epochs must be >= 0");
  if (batch_size <= 0) throw ContractError("complexity batch_size must be positive");
  if (lr <= 0) throw ContractError("complexity lr must be positive");
  if (min_lr_ratio < 0 || min_lr_ratio > 1) throw ContractError("complexity min_lr_ratio must lie in [0, 1]");
  if (patience < 0) throw ContractError("complexity patience must be >= 0");
  if (threshold < 0 || threshold > 1) throw ContractError("complexity threshold must lie in [0, 1]");
}

Tensor shift_image(const Tensor& image, int dy, int dx) {
  const Index s = image.dim(1);
  Tensor out(image.shape());
  for (Index c = 0; c < 3; ++c)
    for (Index y = 0; y < s; ++y)
      for (Index x = 0; x < s; ++x) {
        const Index sy = std::clamp<Index>(y + dy, 0, s - 1);
        const Index sx = std::clamp<Index>(x + dx, 0, s - 1);
        out[(c * s + y) * s + x] = image[(c * s + sy) * s + sx];
      }
  return out;
}

Tensor flip_horizontal(const Tensor& image) {
  const Index s = image.dim(2);
  Tensor out(image.shape());
  const Index rows = image.numel() / s;
  for (Index r = 0; r < rows; ++r)
    for (Index x = 0; x < s; ++x) out[r * s + x] = image[r * s + (s - 1 - x)];
  return out;
}

double validation_metric(const ComplexityModel& model, std::span<const synth::SceneSample* const> samples,
                         double threshold) {
  std::vector<const Tensor*> images;
  std::vector<double> targets;
  std::vector<bool> labels;
  for (const auto* s : samples) {
    images.push_back(&s->image);
    targets.push_back(s->score);
    labels.push_back(s->complex);
  }
  const auto scores = score_images(model, images);
  if (model.head() == HeadType::kBinary) return eval_binary(scores, labels, threshold).f1;
  return pearson(scores, targets);
}

TrainHistory train_complexity(ComplexityModel& model, std::span<const synth::SceneSample* const> train,
                              std::span<const synth::SceneSample* const> val, const ComplexityTrainConfig& config,
                              const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty() || val.empty()) throw ContractError("train_complexity needs nonempty train and val splits");
  TrainHistory history;
  history.metric = model.head() == HeadType::kBinary ? "f1" : "pcc";
  if (config.epochs == 0) return history;

  auto params = model.parameters();
  std::vector<Tensor*> tensors;
  for (auto& p : params) tensors.push_back(p.tensor);
  AdamWConfig opt_cfg;
  opt_cfg.weight_decay = config.weight_decay;
  AdamW opt({{tensors, config.lr}}, opt_cfg);

  Rng order_rng(derive_seed(config.seed, "complexity-order"));
  Rng aug_rng(derive_seed(config.seed, "complexity-augment"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Tensor> best = [&] {
    std::vector<Tensor> snap;
    for (Tensor* t : tensors) snap.push_back(*t);
    return snap;
  }();
  int stale = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double progress = config.epochs > 1 ? static_cast<double>(epoch - 1) / (config.epochs - 1) : 0.0;
    opt.set_lr(0, config.lr * (config.min_lr_ratio + (1 - config.min_lr_ratio) * 0.5 * (1 + std::cos(M_PI * progress))));
    shuffle(order, order_rng);
    double loss_sum = 0.0;
    long batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<Tensor> images;
      std::vector<int> classes;
      Matrix targets(static_cast<Index>(end - start), 1);
      for (std::size_t i = start; i < end; ++i) {
        const auto* s = train[order[i]];
        images.push_back(augment(s->image, config, aug_rng));
        classes.push_back(s->complex ? 1 : 0);
        targets(static_cast<Index>(i - start), 0) = s->score;
      }
      std::vector<const Tensor*> ptrs;
      for (const auto& im : images) ptrs.push_back(&im);

      try {
        Tape tape;
        const Var logits = model.logits(tape, ptrs);
        const Var loss = model.head() == HeadType::kBinary ? cross_entropy(logits, classes)
                                                           : mse_loss(sigmoid(logits), targets);
        opt.zero_grad();
        tape.backward(loss);
        opt.step();
        loss_sum += loss.scalar();
      } catch (const DivergenceError& e) {
        throw DivergenceError("complexity training diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches) + ": " + e.what());
      }
      ++batches;
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), validation_metric(model, val, config.threshold)};
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (history.best_epoch < 0 || rec.val_metric > history.best_metric) {
      history.best_epoch = epoch;
      history.best_metric = rec.val_metric;
      for (std::size_t i = 0; i < tensors.size(); ++i) best[i].data() = tensors[i]->data();
      stale = 0;
    } else if (config.patience > 0 && ++stale >= config.patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i]->data() = best[i].data();
  return history;
}

}  // namespace icar::complexity
