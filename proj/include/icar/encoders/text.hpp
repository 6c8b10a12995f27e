#pragma once

#include "icar/encoders/transformer.hpp"

#include <span>
#include <vector>

namespace icar::enc {

struct TextEncoderConfig {
  int vocab_size = 0;  // 0 selects the synthetic caption vocabulary
  Index width = 64;
  int heads = 4;
  int depth = 4;
  int max_len = 48;  // including <bos> and <eos>
  Index embed_dim = 32;
  Index mlp_ratio = 4;
  std::uint64_t seed = 22;

  void validate() const;
};

// Token and position embeddings, pre-norm blocks, final norm at the <eos> row,
// projection (no bias), L2 normalization.
class TextEncoder {
 public:
  explicit TextEncoder(TextEncoderConfig config);

  const TextEncoderConfig& config() const { return config_; }

  // Token sequences hold caption ids without <bos>/<eos>; both are added here.
  // Sequences longer than max_len - 2 are truncated, keeping the closing <eos>.
  Var forward(Tape& tape, std::span<const std::vector<int>> sequences, CostCounter* counter = nullptr) const;

  std::vector<NamedTensor> parameters();
  std::vector<ConstNamedTensor> parameters() const;
  static bool is_head_parameter(const std::string& name);

 private:
  TextEncoderConfig config_;
  Tensor token_embed_;
  Tensor positions_;
  std::vector<TransformerBlock> blocks_;
  LayerNormParams final_norm_;
  Linear projection_;
};

Vector encode_text(const TextEncoder& model, const std::vector<int>& tokens, CostCounter* counter = nullptr);
Matrix encode_texts(const TextEncoder& model, std::span<const std::vector<int>> sequences,
                    CostCounter* counter = nullptr, std::size_t batch_size = 128);

}  // namespace icar::enc
