#include "icar/numerics/optim.hpp"

#include "icar/error.hpp"

#include <cmath>

namespace icar {

AdamW::AdamW(std::vector<ParamGroup> groups, AdamWConfig config) : groups_(std::move(groups)), config_(config) {
  for (const auto& g : groups_) {
    if (g.lr < 0) throw ContractError("AdamW: learning rate must be nonnegative");
    std::vector<Moments> moments;
    for (const Tensor* p : g.params) moments.push_back({Vector::Zero(p->numel()), Vector::Zero(p->numel())});
    state_.push_back(std::move(moments));
  }
}

void AdamW::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const double lr = groups_[gi].lr;
    for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
      Tensor& p = *groups_[gi].params[pi];
      if (!p.has_grad()) continue;
      Moments& s = state_[gi][pi];
      const Vector& g = p.grad();
      s.m = config_.beta1 * s.m + (1.0 - config_.beta1) * g;
      s.v = config_.beta2 * s.v + (1.0 - config_.beta2) * g.cwiseAbs2();
      const Vector update =
          (s.m / c1).array() / ((s.v / c2).array().sqrt() + config_.eps) + config_.weight_decay * p.data().array();
      p.data() -= lr * update;
    }
  }
}

void AdamW::zero_grad() {
  for (auto& g : groups_)
    for (Tensor* p : g.params) p->zero_grad();
}

double AdamW::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (const auto& g : groups_)
    for (const Tensor* p : g.params)
      if (p->has_grad()) sq += p->grad().squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    for (const auto& g : groups_)
      for (const Tensor* p : g.params) p->scale_grad(max_norm / norm);
  }
  return norm;
}

void AdamW::set_lr(std::size_t group, double lr) {
  if (lr < 0) throw ContractError("AdamW: learning rate must be nonnegative");
  groups_.at(group).lr = lr;
}

}  // namespace icar
