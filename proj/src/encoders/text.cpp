#include "icar/encoders/text.hpp"

#include "icar/error.hpp"
#include "icar/synthdata/scene.hpp"

#include <algorithm>

namespace icar::enc {

using synth::Vocabulary;

void TextEncoderConfig::validate() const {
  if (vocab_size < 0) throw ContractError("text: vocab_size must be >= 0");
  if (heads <= 0 || width <= 0 || width % heads != 0) {
    throw ContractError("text: width " + std::to_string(width) + " must be a multiple of heads " +
                        std::to_string(heads));
  }
  if (depth <= 0) throw ContractError("text: depth must be positive");
  if (max_len < 3) throw ContractError("text: max_len must be at least 3");
  if (embed_dim <= 0 || mlp_ratio <= 0) throw ContractError("text: embed_dim and mlp_ratio must be positive");
}

TextEncoder::TextEncoder(TextEncoderConfig config) : config_(config) {
  if (config_.vocab_size == 0) config_.vocab_size = Vocabulary::instance().size();
  config_.validate();
  Rng rng(derive_seed(config_.seed, "text-init"));
  const Index d = config_.width;
  token_embed_ = normal_tensor({config_.vocab_size, d}, 0.5, rng);
  positions_ = normal_tensor({config_.max_len, d}, 0.02, rng);
  for (int l = 0; l < config_.depth; ++l) blocks_.emplace_back(d, config_.heads, config_.mlp_ratio, rng);
  final_norm_ = LayerNormParams(d);
  projection_ = Linear(d, config_.embed_dim, rng, false);
}

Var TextEncoder::forward(Tape& tape, std::span<const std::vector<int>> sequences, CostCounter* counter) const {
  if (sequences.empty()) throw ContractError("text forward: empty batch");
  const std::size_t keep = static_cast<std::size_t>(config_.max_len - 2);
  std::vector<Index> ids, pos, segments, eos_rows;
  for (const auto& seq : sequences) {
    const std::size_t n = std::min(seq.size(), keep);
    const Index start = static_cast<Index>(ids.size());
    ids.push_back(Vocabulary::kBos);
    for (std::size_t i = 0; i < n; ++i) {
      const int t = seq[i];
      if (t < 0 || t >= config_.vocab_size) {
        throw ContractError("text forward: token id " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(config_.vocab_size));
      }
      ids.push_back(t);
    }
    ids.push_back(Vocabulary::kEos);
    const Index len = static_cast<Index>(ids.size()) - start;
    for (Index p = 0; p < len; ++p) pos.push_back(p);
    segments.push_back(len);
    eos_rows.push_back(start + len - 1);
  }
  Var x = add(gather_rows(tape.parameter(token_embed_), std::move(ids)),
              gather_rows(tape.parameter(positions_), std::move(pos)));
  for (const auto& block : blocks_) x = block(tape, x, segments, counter);
  if (counter) counter->text_forwards += static_cast<long>(sequences.size());
  const Var pooled = final_norm_(tape, gather_rows(x, std::move(eos_rows)));
  return l2_normalize_rows(projection_(tape, pooled));
}

std::vector<NamedTensor> TextEncoder::parameters() {
  std::vector<NamedTensor> out;
  out.push_back({"text.token_embed", &token_embed_});
  out.push_back({"text.positions", &positions_});
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l].collect("text.block" + std::to_string(l), out);
  final_norm_.collect("text.final_norm", out);
  projection_.collect("text.proj", out);
  return out;
}

std::vector<ConstNamedTensor> TextEncoder::parameters() const {
  std::vector<ConstNamedTensor> out;
  for (const auto& [name, t] : const_cast<TextEncoder*>(this)->parameters()) out.push_back({name, t});
  return out;
}

bool TextEncoder::is_head_parameter(const std::string& name) { return name.rfind("text.proj", 0) == 0; }

Matrix encode_texts(const TextEncoder& model, std::span<const std::vector<int>> sequences, CostCounter* counter,
                    std::size_t batch_size) {
  Matrix out(static_cast<Index>(sequences.size()), model.config().embed_dim);
  for (std::size_t start = 0; start < sequences.size(); start += batch_size) {
    const auto chunk = sequences.subspan(start, std::min(batch_size, sequences.size() - start));
    Tape tape;
    out.middleRows(static_cast<Index>(start), static_cast<Index>(chunk.size())) =
        model.forward(tape, chunk, counter).value();
  }
  return out;
}

Vector encode_text(const TextEncoder& model, const std::vector<int>& tokens, CostCounter* counter) {
  return encode_texts(model, std::span(&tokens, 1), counter).row(0).transpose();
}

}  // namespace icar::enc
