#pragma once

#include "icar/numerics/layers.hpp"

#include <span>
#include <string>
#include <vector>

namespace icar::enc {

// Instrumentation shared by the encoders. Not synchronized: use one per thread.
struct CostCounter {
  long layers = 0;           // transformer block applications, summed over forward calls
  long attention_calls = 0;  // scaled_dot_attention invocations
  long text_forwards = 0;    // sequences pushed through the text encoder
  long images = 0;           // images pushed through the vision encoder

  void reset() { *this = {}; }
};

// Pre-norm block: x + Attn(LN(x)), then + MLP(LN(.)) with a 4x GELU MLP.
struct TransformerBlock {
  LayerNormParams ln1;
  Linear q, k, v, o;
  LayerNormParams ln2;
  Linear fc1, fc2;
  int heads = 1;

  TransformerBlock() = default;
  TransformerBlock(Index width, int heads, Index mlp_ratio, Rng& rng);

  Var operator()(Tape& tape, const Var& x, std::span<const Index> segments, CostCounter* counter) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

}  // namespace icar::enc
