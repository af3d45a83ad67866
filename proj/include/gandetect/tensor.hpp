#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <string>
#include <vector>

namespace gandetect {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixMap = Eigen::Map<RowMatrix>;
using ConstRowMatrixMap = Eigen::Map<const RowMatrix>;

std::string shape_string(const Shape& shape);
Index shape_size(const Shape& shape);

/// Dense row-major N-d array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Eigen::VectorXd data);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor constant(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Eigen::VectorXd& data() { return data_; }
  const Eigen::VectorXd& data() const { return data_; }

  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  /// Row-major C x H x W accessor.
  double& at(Index c, Index y, Index x) { return data_[(c * shape_[1] + y) * shape_[2] + x]; }
  double at(Index c, Index y, Index x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  /// View the data as a rows x cols row-major matrix; rows * cols must equal size().
  RowMatrixMap matrix(Index rows, Index cols);
  ConstRowMatrixMap matrix(Index rows, Index cols) const;

  double item() const;
  bool all_finite() const { return data_.allFinite(); }
  void set_zero() { data_.setZero(); }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  Eigen::VectorXd data_;
};

}  // namespace gandetect
