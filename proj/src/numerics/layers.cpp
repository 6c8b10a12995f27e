#include "icar/numerics/layers.hpp"

#include <cmath>
#include <random>

namespace icar {

Tensor normal_tensor(std::vector<Index> shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape), true);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

Linear::Linear(Index in, Index out, Rng& rng, bool with_bias)
    : weight(normal_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng)), has_bias(with_bias) {
  if (with_bias) bias = Tensor({1, out}, true);
}

Var Linear::operator()(Tape& tape, const Var& x) const {
  Var y = matmul(x, tape.parameter(weight));
  return has_bias ? add_bias(y, tape.parameter(bias)) : y;
}

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".weight", &weight});
  if (has_bias) out.push_back({prefix + ".bias", &bias});
}

LayerNormParams::LayerNormParams(Index width) : gain({1, width}, true), bias({1, width}, true) {
  gain.data().setOnes();
}

Var LayerNormParams::operator()(Tape& tape, const Var& x) const {
  return layer_norm(x, tape.parameter(gain), tape.parameter(bias));
}

void LayerNormParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) {
  out.push_back({prefix + ".gain", &gain});
  out.push_back({prefix + ".bias", &bias});
}

}  // namespace icar
