#pragma once

#include "icar/numerics/gradcheck.hpp"
#include "icar/numerics/ops.hpp"
#include "icar/rng.hpp"
#include "icar/training/dual_path.hpp"

#include <string>
#include <utility>
#include <vector>

namespace icar::testing {

inline Matrix random_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * uniform_unit(rng) - 1.0);
  return m;
}

// Random linear functional of y, so every output element gets a distinct weight.
inline Var weighted_sum(Tape& tape, const Var& y, std::uint64_t seed) {
  return sum(hadamard(y, tape.constant(random_matrix(y.rows(), y.cols(), seed))));
}

using GradientErrors = std::vector<std::pair<std::string, double>>;

// Max relative error of every differentiable op against central differences,
// each argument position checked separately.
inline GradientErrors op_gradient_errors(std::uint64_t seed) {
  auto tensor = [&](Index r, Index c, std::uint64_t s) {
    Matrix m = random_matrix(r, c, seed * 1000 + s);
    return Tensor({r, c}, Eigen::Map<Vector>(m.data(), m.size()));
  };
  GradientErrors out;
  auto check = [&](const char* name, const Tensor& at, const ScalarFn& f) {
    Tensor probe = at;
    out.emplace_back(name, finite_diff_check(f, probe, 1e-5));
  };
  const Tensor x = tensor(4, 6, 1);
  const Matrix other = random_matrix(6, 3, seed * 1000 + 2);
  const Matrix same = random_matrix(4, 6, seed * 1000 + 3);
  const Matrix left = random_matrix(3, 4, seed * 1000 + 4);

  check("matmul_left", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, matmul(t.parameter(p), t.constant(other)), 5); });
  check("matmul_right", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, matmul(t.constant(left), t.parameter(p)), 6); });
  check("add", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, add(t.parameter(p), t.constant(same)), 7); });
  check("sub", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, sub(t.constant(same), t.parameter(p)), 8); });
  check("hadamard", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, hadamard(t.parameter(p), t.parameter(p)), 9); });
  check("scale", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, scale(t.parameter(p), -2.5), 10); });
  check("transpose", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, transpose(t.parameter(p)), 11); });
  check("reshape", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, reshape(t.parameter(p), 3, 8), 12); });
  check("softmax_rows", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, softmax(t.parameter(p), 1), 13); });
  check("softmax_cols", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, softmax(t.parameter(p), 0), 14); });
  check("gelu", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, gelu(scale(t.parameter(p), 3.0)), 15); });
  check("sigmoid", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, sigmoid(scale(t.parameter(p), 3.0)), 16); });
  check("l2_normalize", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, l2_normalize_rows(t.parameter(p)), 17); });
  check("gather", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, gather_rows(t.parameter(p), {3, 0, 0, 2, 1}), 18); });
  check("concat", x, [&](Tape& t, Tensor& p) {
    return weighted_sum(t, concat_rows({t.parameter(p), t.constant(same), t.parameter(p)}), 19);
  });
  check("group_mean", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, group_mean(t.parameter(p), 2), 20); });
  check("mean", x, [&](Tape& t, Tensor& p) { return mean(hadamard(t.parameter(p), t.parameter(p))); });
  const std::vector<int> targets{0, 5, 2, 3};
  check("cross_entropy", x, [&](Tape& t, Tensor& p) { return cross_entropy(scale(t.parameter(p), 2.0), targets); });
  check("mse", x, [&](Tape& t, Tensor& p) { return mse_loss(t.parameter(p), same); });
  const Matrix bias = random_matrix(1, 6, seed * 1000 + 21);
  check("add_bias_x", x, [&](Tape& t, Tensor& p) { return weighted_sum(t, add_bias(t.parameter(p), t.constant(bias)), 22); });

  const Tensor row = tensor(1, 6, 30);
  check("add_bias_b", row, [&](Tape& t, Tensor& p) { return weighted_sum(t, add_bias(t.constant(same), t.parameter(p)), 31); });
  const Matrix g0 = random_matrix(1, 6, seed * 1000 + 32);
  const Matrix b0 = random_matrix(1, 6, seed * 1000 + 33);
  check("layer_norm_x", x, [&](Tape& t, Tensor& p) {
    return weighted_sum(t, layer_norm(t.parameter(p), t.constant(g0), t.constant(b0)), 34);
  });
  check("layer_norm_gain", row, [&](Tape& t, Tensor& p) {
    return weighted_sum(t, layer_norm(t.constant(same), t.parameter(p), t.constant(b0)), 35);
  });
  check("layer_norm_bias", row, [&](Tape& t, Tensor& p) {
    return weighted_sum(t, layer_norm(t.constant(same), t.constant(g0), t.parameter(p)), 36);
  });

  // two segments of 1 and 3 tokens
  const std::vector<Index> segs{1, 3};
  const Matrix qa = random_matrix(4, 6, seed * 1000 + 40), ka = random_matrix(4, 6, seed * 1000 + 41),
               va = random_matrix(4, 6, seed * 1000 + 42);
  check("attention_q", x, [&](Tape& t, Tensor& p) {
    return weighted_sum(t, scaled_dot_attention(t.parameter(p), t.constant(ka), t.constant(va), 2, segs), 43);
  });
  check("attention_k", x, [&](Tape& t, Tensor& p) {
    return weighted_sum(t, scaled_dot_attention(t.constant(qa), t.parameter(p), t.constant(va), 2, segs), 44);
  });
  check("attention_v", x, [&](Tape& t, Tensor& p) {
    return weighted_sum(t, scaled_dot_attention(t.constant(qa), t.constant(ka), t.parameter(p), 3, segs), 45);
  });

  // 2 images, 4x4, 3 channels
  const Tensor img = tensor(32, 3, 50);
  const Matrix wconv = random_matrix(27, 2, seed * 1000 + 51);
  check("conv3x3_input", img, [&](Tape& t, Tensor& p) {
    return weighted_sum(t, conv3x3(t.parameter(p), t.constant(wconv), 2, 4, 4), 52);
  });
  const Matrix imgm = random_matrix(32, 3, seed * 1000 + 54);
  check("conv3x3_weight", tensor(27, 2, 53), [&](Tape& t, Tensor& p) {
    return weighted_sum(t, conv3x3(t.constant(imgm), t.parameter(p), 2, 4, 4), 55);
  });
  check("avg_pool2x2", img, [&](Tape& t, Tensor& p) { return weighted_sum(t, avg_pool2x2(t.parameter(p), 2, 4, 4), 56); });
  return out;
}

// Towers small enough for exhaustive finite differences.
inline enc::IcarModel tiny_icar_model(std::uint64_t seed) {
  enc::VisionEncoderConfig v;
  v.image_size = 16;
  v.depth = 3;
  v.exit_layers = {1, 3};
  v.width = 8;
  v.heads = 2;
  v.embed_dim = 4;
  v.seed = seed;
  enc::TextEncoderConfig t;
  t.width = 8;
  t.heads = 2;
  t.depth = 2;
  t.embed_dim = 4;
  t.seed = seed + 1000;
  return {v, t};
}

// Max relative error of loss_total over a four-pair batch, three random
// coordinates of every parameter tensor of both towers.
inline GradientErrors dual_path_gradient_errors(std::uint64_t seed) {
  auto model = tiny_icar_model(seed);
  synth::GeneratorConfig g;
  g.n_samples = 4;
  g.image_size = 16;
  g.seed = seed + 100;
  const auto ds = synth::generate_dataset(g);
  train::Batch b;
  for (const auto& s : ds.samples) {
    b.images.push_back(&s.image);
    b.tokens.push_back(s.tokens);
    b.simple.push_back(!s.complex);
  }
  train::DualPathConfig cfg;
  cfg.early_exit = 1;
  cfg.temperature = 0.5;
  cfg.alpha = 0.3;
  Rng rng(seed);
  GradientErrors out;
  for (auto& [name, p] : model.parameters()) {
    std::vector<Index> coords;
    for (int i = 0; i < 3; ++i) coords.push_back(static_cast<Index>(uniform_index(rng, p->numel())));
    out.emplace_back(name, finite_diff_check(
                               [&](Tape& tape, Tensor&) { return train::dual_path_loss(tape, model, b, cfg).loss_total; },
                               *p, 1e-5, coords));
  }
  return out;
}

}  // namespace icar::testing
