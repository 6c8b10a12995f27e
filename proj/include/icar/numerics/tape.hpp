#pragma once

#include "icar/numerics/tensor.hpp"

#include <array>
#include <deque>
#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <vector>

namespace icar {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Gradient of the last backward() call; zero-sized when the node received none.
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;

  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

enum class OpKind : int {
  kLeaf = 0,
  kMatmul,
  kAdd,
  kMul,
  kScale,
  kBias,
  kTranspose,
  kReshape,
  kSoftmax,
  kLayerNorm,
  kGelu,
  kSigmoid,
  kAttention,
  kNormalize,
  kGather,
  kConcat,
  kReduce,
  kLoss,
  kConv,
  kPool,
  kCount_
};

const char* op_name(OpKind kind);

// Reverse-mode recording of one forward pass. A Tape is built per forward
// pass and discarded afterwards; parameters are bound by pointer, so bound
// Tensors must outlive the tape.
class Tape {
 public:
  // Receives the gradient of the node's output and pushes contributions to
  // its inputs through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf bound to `t`. Repeated binding of the same tensor returns the same node.
  // After backward() the gradient is accumulated into t when t.requires_grad().
  Var parameter(const Tensor& t);

  Var record(OpKind kind, Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(OpKind kind, Matrix value, const std::vector<Var>& inputs, BackwardFn backward);

  // Propagates d(loss)/d(node) to every node, then into bound parameter tensors.
  // Calling it repeatedly accumulates again into the parameters.
  void backward(const Var& loss);

  bool needs_grad(const Var& v) const { return nodes_.at(v.id()).needs_grad; }
  void accumulate(const Var& v, const Eigen::Ref<const Matrix>& g);

  const Matrix& value(int id) const { return nodes_.at(id).value; }
  const Matrix& grad(int id) const { return nodes_.at(id).grad; }

  std::size_t size() const { return nodes_.size(); }
  std::size_t count(OpKind kind) const { return counts_[static_cast<int>(kind)]; }
  // Node ids in the order the last backward() ran their rules.
  const std::vector<int>& last_backward_order() const { return backward_order_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    const Tensor* bound = nullptr;
    BackwardFn backward;
  };

  Var push(OpKind kind, Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, int> bound_ids_;
  std::array<std::size_t, static_cast<int>(OpKind::kCount_)> counts_{};
  std::vector<int> backward_order_;
};

}  // namespace icar
