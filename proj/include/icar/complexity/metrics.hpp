#pragma once

#include <optional>
#include <span>
#include <vector>

namespace icar::complexity {

struct RegressionMetrics {
  double pcc = 0.0;
  double srcc = 0.0;
  double rmse = 0.0;
};

struct BinaryMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> roc_auc;  // empty when only one class is present
};

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> midranks(std::span<const double> values);

// Throws UndefinedMetricError when n < 2 or either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);
double spearman(std::span<const double> a, std::span<const double> b);

RegressionMetrics eval_regression(std::span<const double> predictions, std::span<const double> targets);

// Mann-Whitney statistic with midranks: P(score_pos > score_neg) + 0.5 P(tie).
// Throws UndefinedMetricError when a class is missing.
double roc_auc(std::span<const double> scores, const std::vector<bool>& labels);

// Positive class is "complex"; a sample is predicted complex iff score >= threshold.
// Precision (recall) is 0 when there are no predicted (actual) positives.
BinaryMetrics eval_binary(std::span<const double> scores, const std::vector<bool>& labels, double threshold = 0.5);

}  // namespace icar::complexity
