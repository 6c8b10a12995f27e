#pragma once

#include "icar/numerics/ops.hpp"
#include "icar/rng.hpp"

#include <string>
#include <vector>

namespace icar {

// Normal(0, std^2) tensor from a seeded stream.
Tensor normal_tensor(std::vector<Index> shape, double stddev, Rng& rng);

// y = x W (+ b). W is (in x out).
struct Linear {
  Tensor weight;
  Tensor bias;  // (1 x out); empty when constructed without bias
  bool has_bias = true;

  Linear() = default;
  // Weights ~ N(0, 1/in); bias zero.
  Linear(Index in, Index out, Rng& rng, bool with_bias = true);

  Var operator()(Tape& tape, const Var& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  LayerNormParams() = default;
  explicit LayerNormParams(Index width);

  Var operator()(Tape& tape, const Var& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out);
};

}  // namespace icar
