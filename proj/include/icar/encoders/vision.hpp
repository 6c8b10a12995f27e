#pragma once

#include "icar/encoders/transformer.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace icar::enc {

struct VisionEncoderConfig {
  int image_size = 32;
  int patch_size = 4;
  int depth = 12;
  std::vector<int> exit_layers{4, 6, 8, 10, 12};
  Index width = 64;
  int heads = 4;
  Index embed_dim = 32;
  Index mlp_ratio = 4;
  std::uint64_t seed = 21;

  void validate() const;
  bool is_exit(int layer) const;
  Index patches() const { return (image_size / patch_size) * (image_size / patch_size); }
};

// Patch embedding, class token, learned positions, `depth` pre-norm blocks, one
// final layer norm shared by every exit, and one shared projection (no bias).
class MiniViT {
 public:
  explicit MiniViT(VisionEncoderConfig config);

  const VisionEncoderConfig& config() const { return config_; }

  // Unit-norm (batch x embed_dim) embeddings at each requested exit, computed in a
  // single pass that stops at the deepest one. Each exit must be an exit layer.
  std::vector<Var> forward(Tape& tape, std::span<const Tensor* const> images, std::span<const int> exits,
                           CostCounter* counter = nullptr) const;

  std::vector<NamedTensor> parameters();
  std::vector<ConstNamedTensor> parameters() const;
  // Parameters trained at the head learning rate.
  static bool is_head_parameter(const std::string& name);

 private:
  Var embed(Tape& tape, std::span<const Tensor* const> images) const;
  Var exit_embedding(Tape& tape, const Var& tokens, Index batch) const;

  VisionEncoderConfig config_;
  Linear patch_embed_;
  Tensor class_token_;
  Tensor positions_;
  std::vector<TransformerBlock> blocks_;
  LayerNormParams final_norm_;
  Linear projection_;
};

// (batch * patches x 3 * P * P); each row is one patch, channel-major inside.
Matrix patchify(std::span<const Tensor* const> images, int patch_size);

Vector encode_image_at_exit(const MiniViT& model, const Tensor& image, int exit_layer,
                            CostCounter* counter = nullptr);
// encode_image_at_exit at the final layer.
Vector encode_image_full(const MiniViT& model, const Tensor& image, CostCounter* counter = nullptr);
// Row i embeds images[i]; computed in batches.
Matrix encode_images_at_exit(const MiniViT& model, std::span<const Tensor* const> images, int exit_layer,
                             CostCounter* counter = nullptr, std::size_t batch_size = 64);

}  // namespace icar::enc
