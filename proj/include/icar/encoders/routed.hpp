#pragma once

#include "icar/complexity/model.hpp"
#include "icar/encoders/vision.hpp"

#include <span>
#include <vector>

namespace icar::enc {

struct RoutedEmbedding {
  Vector embedding;
  complexity::RoutingDecision decision;
  int layers_used = 0;
};

struct RoutedBatch {
  Matrix embeddings;  // row i embeds images[i]
  std::vector<complexity::RoutingDecision> decisions;
  std::vector<int> layers_used;
};

// Routing decisions for a batch. Either head type works: the score is the
// regression output or the complex-class probability.
std::vector<complexity::RoutingDecision> route_images(const complexity::ComplexityModel& router,
                                                      std::span<const Tensor* const> images, double threshold,
                                                      std::uint64_t first_id = 0);

// Simple images exit at exit_for_simple, complex ones at the final layer.
RoutedEmbedding encode_image_routed(const MiniViT& vit, const complexity::ComplexityModel& router,
                                    const Tensor& image, int exit_for_simple, double threshold = 0.5,
                                    std::uint64_t sample_id = 0, CostCounter* counter = nullptr);

// Batched form: classifies everything, then encodes the simple and the complex
// group separately, each at its own depth.
RoutedBatch encode_images_routed(const MiniViT& vit, const complexity::ComplexityModel& router,
                                 std::span<const Tensor* const> images, int exit_for_simple, double threshold = 0.5,
                                 CostCounter* counter = nullptr);
// Same, with decisions computed elsewhere.
RoutedBatch encode_images_routed(const MiniViT& vit, std::span<const complexity::RoutingDecision> decisions,
                                 std::span<const Tensor* const> images, int exit_for_simple,
                                 CostCounter* counter = nullptr);

}  // namespace icar::enc
