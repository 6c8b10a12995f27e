#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace icar {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

std::string shape_string(const std::vector<Index>& shape);

// Dense fp64 array in row-major order with an optional gradient buffer.
//
// Model parameters and images are Tensors. Every Tensor can be viewed as a
// matrix whose column count is the last dimension and whose row count is the
// product of the leading dimensions.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Index> shape, bool requires_grad = false);
  Tensor(std::vector<Index> shape, Vector data, bool requires_grad = false);

  static Tensor from_matrix(const Eigen::Ref<const Matrix>& m, bool requires_grad = false);

  const std::vector<Index>& shape() const { return shape_; }
  Index dim(std::size_t i) const { return shape_.at(i); }
  std::size_t ndim() const { return shape_.size(); }
  Index numel() const { return data_.size(); }
  Index rows() const;
  Index cols() const;

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }
  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  Eigen::Map<Matrix> matrix() { return {data_.data(), rows(), cols()}; }
  Eigen::Map<const Matrix> matrix() const { return {data_.data(), rows(), cols()}; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const { return grad_.has_value(); }
  const Vector& grad() const;
  Eigen::Map<const Matrix> grad_matrix() const { return {grad().data(), rows(), cols()}; }
  // Adds `g` (viewed through this tensor's matrix shape) into the gradient
  // buffer. The buffer is separate from the value, so a const tensor still
  // collects gradients.
  void accumulate_grad(const Eigen::Ref<const Matrix>& g) const;
  void zero_grad() const { grad_.reset(); }
  void scale_grad(double s) const {
    if (grad_) *grad_ *= s;
  }

  bool all_finite() const { return data_.allFinite() && (!grad_ || grad_->allFinite()); }

 private:
  std::vector<Index> shape_;
  Vector data_;
  mutable std::optional<Vector> grad_;
  bool requires_grad_ = false;
};

// A parameter tensor together with its stable name (used by optimizers and checkpoints).
struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

struct ConstNamedTensor {
  std::string name;
  const Tensor* tensor;
};

}  // namespace icar
