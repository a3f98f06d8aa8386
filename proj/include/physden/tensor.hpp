#pragma once

#include <Eigen/Core>

#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "physden/errors.hpp"

namespace physden {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrixd = RowMatrix<double>;

/// Dense row-major array of up to three dimensions.
///
/// Rank-0 tensors (empty shape) hold a single scalar. Rank-2 and rank-3
/// tensors expose their first dimension as rows and the flattened rest as
/// columns through matrix().
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = RowMatrix<Scalar>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  Tensor() : data_(Vector::Zero(1)) {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_size(shape_))) {}

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                           std::to_string(data_.size()) + " values");
    }
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Eigen::Map<const Vector>(values.begin(), static_cast<Index>(values.size()))) {}

  static Tensor scalar(Scalar value) { return Tensor(Shape{}, Vector::Constant(1, value)); }

  static Tensor constant(Shape shape, Scalar value) {
    const Index n = shape_size(shape);
    return Tensor(std::move(shape), Vector::Constant(n, value));
  }

  template <typename Derived>
  static Tensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    Matrix rm = m;
    return Tensor(Shape{rm.rows(), rm.cols()}, Eigen::Map<const Vector>(rm.data(), rm.size()));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }

  Index rows() const { return shape_.empty() ? 1 : shape_[0]; }
  Index cols() const { return shape_.empty() ? 1 : size() / std::max<Index>(shape_[0], 1); }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

  MatrixMap matrix() { return MatrixMap(data_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), rows(), cols()); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar item() const {
    if (size() != 1) throw ContractViolation("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && (a.data_.array() == b.data_.array()).all();
  }

 private:
  Shape shape_;
  Vector data_;
};

using Tensord = Tensor<double>;

}  // namespace physden
