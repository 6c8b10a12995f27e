#include "icar/encoders/transformer.hpp"


namespace icar::enc {

TransformerBlock::TransformerBlock(Index width, int h, Index mlp_ratio, Rng& rng)
    : ln1(width),
      q(width, width, rng),
      k(width, width, rng, false),
      v(width, width, rng),
      o(width, width, rng),
      ln2(width),
      fc1(width, mlp_ratio * width, rng),
      fc2(mlp_ratio * width, width, rng),
      heads(h) {
  // halve residual output projections
  const double depth_scale = 0.5;
  o.weight.data() *= depth_scale;
  fc2.weight.data() *= depth_scale;
}

Var TransformerBlock::operator()(Tape& tape, const Var& x, std::span<const Index> segments,
                                 CostCounter* counter) const {
  const Var a = ln1(tape, x);
  const Var attn = scaled_dot_attention(q(tape, a), k(tape, a), v(tape, a), heads, segments);
  const Var h = add(x, o(tape, attn));
  const Var m = fc2(tape, gelu(fc1(tape, ln2(tape, h))));
  if (counter) {
    ++counter->layers;
    ++counter->attention_calls;
  }
  return add(h, m);
}

void TransformerBlock::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  ln1.collect(prefix + ".ln1", out);
  q.collect(prefix + ".attn.q", out);
  k.collect(prefix + ".attn.k", out);
  v.collect(prefix + ".attn.v", out);
  o.collect(prefix + ".attn.o", out);
  ln2.collect(prefix + ".ln2", out);
  fc1.collect(prefix + ".mlp.fc1", out);
  fc2.collect(prefix + ".mlp.fc2", out);
}

}  // namespace icar::enc
