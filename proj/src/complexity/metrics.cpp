#include "icar/complexity/metrics.hpp"

#include "icar/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace icar::complexity {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  check_lengths(a.size(), b.size(), "pearson");
  const std::size_t n = a.size();
  if (n < 2) throw UndefinedMetricError("correlation needs at least 2 values, got " + std::to_string(n));
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedMetricError("correlation undefined for zero-variance input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  check_lengths(a.size(), b.size(), "spearman");
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  return pearson(ra, rb);
}

RegressionMetrics eval_regression(std::span<const double> predictions, std::span<const double> targets) {
  RegressionMetrics m;
  m.pcc = pearson(predictions, targets);
  m.srcc = spearman(predictions, targets);
  double se = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) se += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
  m.rmse = std::sqrt(se / static_cast<double>(predictions.size()));
  return m;
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
  check_lengths(scores.size(), labels.size(), "roc_auc");
  const auto ranks = midranks(scores);
  double pos_rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      pos_rank_sum += ranks[i];
      ++pos;
    }
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("roc_auc undefined: labels contain a single class");
  const double np = static_cast<double>(pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(neg));
}

BinaryMetrics eval_binary(std::span<const double> scores, const std::vector<bool>& labels, double threshold) {
  check_lengths(scores.size(), labels.size(), "eval_binary");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i]) ++tp;
    if (predicted && !labels[i]) ++fp;
    if (!predicted && labels[i]) ++fn;
  }
  BinaryMetrics m;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  try {
    m.roc_auc = roc_auc(scores, labels);
  } catch (const UndefinedMetricError&) {
    m.roc_auc.reset();
  }
  return m;
}

}  // namespace icar::complexity
