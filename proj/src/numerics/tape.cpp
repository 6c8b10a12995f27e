#include "icar/numerics/tape.hpp"

#include "icar/error.hpp"

#include <iterator>

namespace icar {

const char* op_name(OpKind kind) {
  static constexpr const char* kNames[] = {
      "leaf",      "matmul",      "add",       "mul",    "scale",  "add_bias", "transpose",
      "reshape",   "softmax",     "layer_norm", "gelu",  "sigmoid", "attention", "l2_normalize",
      "gather",    "concat",      "reduce",    "loss",   "conv3x3", "avg_pool"};
  static_assert(std::size(kNames) == static_cast<std::size_t>(OpKind::kCount_));
  return kNames[static_cast<int>(kind)];
}

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ContractError("scalar() on a non-scalar value");
  return v(0, 0);
}

Var Tape::push(OpKind kind, Node node) {
  nodes_.push_back(std::move(node));
  ++counts_[static_cast<int>(kind)];
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(OpKind::kLeaf, std::move(n));
}

Var Tape::parameter(const Tensor& t) {
  if (auto it = bound_ids_.find(&t); it != bound_ids_.end()) return Var(this, it->second);
  Node n;
  n.value = t.matrix();
  n.needs_grad = t.requires_grad();
  n.bound = &t;
  Var v = push(OpKind::kLeaf, std::move(n));
  bound_ids_.emplace(&t, v.id());
  return v;
}

Var Tape::record(OpKind kind, Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(kind, std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(OpKind kind, Matrix value, const std::vector<Var>& inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw ContractError("operation mixes values from different tapes");
    n.needs_grad = n.needs_grad || nodes_[in.id_].needs_grad;
  }
  if (!n.value.allFinite()) {
    throw DivergenceError(std::string("non-finite value produced by ") + op_name(kind));
  }
  if (n.needs_grad) n.backward = std::move(backward);
  return push(kind, std::move(n));
}

void Tape::accumulate(const Var& v, const Eigen::Ref<const Matrix>& g) {
  Node& n = nodes_.at(v.id());
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw ContractError("backward() on a value from another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " + std::to_string(loss.rows()) + "x" +
                        std::to_string(loss.cols()));
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  backward_order_.clear();
  nodes_[loss.id_].grad = Matrix::Ones(1, 1);

  for (int id = loss.id_; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.size() == 0) continue;
    backward_order_.push_back(id);
    n.backward(*this, n.grad);
  }
  for (Node& n : nodes_) {
    if (n.bound == nullptr || !n.needs_grad) continue;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.bound->accumulate_grad(n.grad);
  }
}

}  // namespace icar
