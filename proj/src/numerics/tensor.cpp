#include "icar/numerics/tensor.hpp"

#include "icar/error.hpp"

#include <numeric>
#include <sstream>

namespace icar {

std::string shape_string(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

Index checked_numel(const std::vector<Index>& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  Index n = 1;
  for (Index d : shape) {
    if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<Index> shape, bool requires_grad)
    : shape_(std::move(shape)), requires_grad_(requires_grad) {
  data_ = Vector::Zero(checked_numel(shape_));
}

Tensor::Tensor(std::vector<Index> shape, Vector data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
  if (checked_numel(shape_) != data_.size()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::from_matrix(const Eigen::Ref<const Matrix>& m, bool requires_grad) {
  Tensor t({m.rows(), m.cols()}, requires_grad);
  t.matrix() = m;
  return t;
}

Index Tensor::rows() const {
  return shape_.size() <= 1 ? 1 : data_.size() / shape_.back();
}

Index Tensor::cols() const { return shape_.empty() ? 0 : shape_.back(); }

const Vector& Tensor::grad() const {
  if (!grad_) throw ContractError("tensor " + shape_string(shape_) + " has no gradient");
  return *grad_;
}

void Tensor::accumulate_grad(const Eigen::Ref<const Matrix>& g) const {
  if (g.size() != data_.size()) {
    throw DimensionError("gradient of size " + std::to_string(g.size()) + " for tensor " +
                         shape_string(shape_));
  }
  if (!grad_) grad_ = Vector::Zero(data_.size());
  Eigen::Map<Matrix> dst(grad_->data(), rows(), cols());
  if (g.rows() == rows()) {
    dst += g;
  } else {
    const Matrix dense = g;
    dst += Eigen::Map<const Matrix>(dense.data(), rows(), cols());
  }
}

}  // namespace icar
