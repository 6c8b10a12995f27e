#pragma once

#include "icar/numerics/layers.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace icar::complexity {

enum class HeadType { kRegression, kBinary };
std::string_view head_name(HeadType h);
HeadType parse_head(std::string_view name);

struct ComplexityModelConfig {
  HeadType head = HeadType::kBinary;
  int image_size = 32;
  std::array<Index, 3> widths{16, 32, 64};
  Index hidden = 32;  // binary MLP width
  std::uint64_t seed = 11;

  void validate() const;
};

// Three stages of (3x3 conv + bias, channel layer norm, GELU, 2x2 average pool),
// flattened into either
//   regression: Linear -> 1 logit, score = sigmoid(logit), final layer zero-initialized
//   binary:     Linear -> GELU -> Linear -> 2 logits (simple, complex), score = softmax[complex]
class ComplexityModel {
 public:
  explicit ComplexityModel(ComplexityModelConfig config);

  const ComplexityModelConfig& config() const { return config_; }
  HeadType head() const { return config_.head; }

  // images are 3 x S x S; returns (batch x 1) for regression, (batch x 2) for binary.
  Var logits(Tape& tape, std::span<const Tensor* const> images) const;
  // Scores in [0, 1] from logits: sigmoid for regression, complex-class softmax for binary.
  static Vector scores_from_logits(const Matrix& logits, HeadType head);

  std::vector<NamedTensor> parameters();
  std::vector<ConstNamedTensor> parameters() const;

  void save(const std::filesystem::path& path) const;
  static ComplexityModel load(const std::filesystem::path& path);

 private:
  struct Stage {
    Tensor conv_weight;  // (9 * cin x cout)
    Tensor conv_bias;    // (1 x cout)
    LayerNormParams norm;
  };

  ComplexityModelConfig config_;
  std::array<Stage, 3> stages_;
  Linear fc1_;  // regression: the only head layer
  Linear fc2_;  // binary only
};

// Pixel-major (batch * S * S x 3) stack of 3 x S x S images, shifted to zero mean range.
Matrix to_pixel_rows(std::span<const Tensor* const> images);

// Regression score in [0, 1]. Throws ContractError on a binary model.
double predict_score(const ComplexityModel& model, const Tensor& image);

struct RoutingDecision {
  std::uint64_t sample_id = 0;
  bool is_simple = false;
  double score = 0.0;
  double threshold = 0.5;
};

// is_simple iff score < threshold, so a tie routes to full processing.
RoutingDecision make_decision(std::uint64_t sample_id, double score, double threshold);
// Binary head; score is the complex-class probability. Throws ContractError on a regression model.
RoutingDecision classify(const ComplexityModel& model, const Tensor& image, double threshold = 0.5,
                         std::uint64_t sample_id = 0);

// Batched scores for either head type.
std::vector<double> score_images(const ComplexityModel& model, std::span<const Tensor* const> images,
                                 std::size_t batch_size = 64);

}  // namespace icar::complexity
