#pragma once

#include "icar/numerics/tensor.hpp"

#include <vector>

namespace icar {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct ParamGroup {
  std::vector<Tensor*> params;
  double lr = 1e-3;
};

// Adaptive-moment update with decoupled weight decay:
//   p -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
// Tensors that received no gradient since the last zero_grad() are skipped.
class AdamW {
 public:
  AdamW(std::vector<ParamGroup> groups, AdamWConfig config = {});

  void step();
  void zero_grad();
  // Rescales all gradients so their joint L2 norm is at most max_norm; returns the norm before clipping.
  double clip_grad_norm(double max_norm);
  long steps() const { return steps_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }
  void set_lr(std::size_t group, double lr);

 private:
  struct Moments {
    Vector m;
    Vector v;
  };
  std::vector<ParamGroup> groups_;
  std::vector<std::vector<Moments>> state_;
  AdamWConfig config_;
  long steps_ = 0;
};

}  // namespace icar
