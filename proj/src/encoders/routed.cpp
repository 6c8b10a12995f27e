#include "icar/encoders/routed.hpp"

#include "icar/error.hpp"

namespace icar::enc {

std::vector<complexity::RoutingDecision> route_images(const complexity::ComplexityModel& router,
                                                      std::span<const Tensor* const> images, double threshold,
                                                      std::uint64_t first_id) {
  const auto scores = complexity::score_images(router, images);
  std::vector<complexity::RoutingDecision> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back(complexity::make_decision(first_id + i, scores[i], threshold));
  return out;
}

RoutedBatch encode_images_routed(const MiniViT& vit, std::span<const complexity::RoutingDecision> decisions,
                                 std::span<const Tensor* const> images, int exit_for_simple, CostCounter* counter) {
  if (decisions.size() != images.size()) throw DimensionError("routed encoding: decisions and images differ in count");
  if (!vit.config().is_exit(exit_for_simple)) {
    throw ContractError("routed encoding: layer " + std::to_string(exit_for_simple) + " is not an exit layer");
  }
  const int full = vit.config().depth;
  RoutedBatch out;
  out.embeddings.resize(static_cast<Index>(images.size()), vit.config().embed_dim);
  out.decisions.assign(decisions.begin(), decisions.end());
  out.layers_used.resize(images.size());
  std::vector<const Tensor*> groups[2];
  std::vector<Index> rows[2];
  for (std::size_t i = 0; i < images.size(); ++i) {
    const int g = decisions[i].is_simple ? 0 : 1;
    groups[g].push_back(images[i]);
    rows[g].push_back(static_cast<Index>(i));
    out.layers_used[i] = g == 0 ? exit_for_simple : full;
  }
  for (int g = 0; g < 2; ++g) {
    if (groups[g].empty()) continue;
    const Matrix emb = encode_images_at_exit(vit, groups[g], g == 0 ? exit_for_simple : full, counter);
    for (std::size_t j = 0; j < rows[g].size(); ++j) out.embeddings.row(rows[g][j]) = emb.row(static_cast<Index>(j));
  }
  return out;
}

RoutedBatch encode_images_routed(const MiniViT& vit, const complexity::ComplexityModel& router,
                                 std::span<const Tensor* const> images, int exit_for_simple, double threshold,
                                 CostCounter* counter) {
  const auto decisions = route_images(router, images, threshold);
  return encode_images_routed(vit, decisions, images, exit_for_simple, counter);
}

RoutedEmbedding encode_image_routed(const MiniViT& vit, const complexity::ComplexityModel& router,
                                    const Tensor& image, int exit_for_simple, double threshold,
                                    std::uint64_t sample_id, CostCounter* counter) {
  const Tensor* one[] = {&image};
  auto decisions = route_images(router, one, threshold, sample_id);
  const RoutedBatch b = encode_images_routed(vit, decisions, one, exit_for_simple, counter);
  return {b.embeddings.row(0).transpose(), decisions.front(), b.layers_used.front()};
}

}  // namespace icar::enc
