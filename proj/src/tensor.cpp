#include "gandetect/tensor.hpp"

#include "gandetect/errors.hpp"

#include <sstream>

namespace gandetect {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ContractViolation("tensor shape must have at least one axis");
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] < 1) {
      throw ContractViolation("tensor extent " + std::to_string(i) + " of " +
                              shape_string(shape) + " is not positive");
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_ = Eigen::VectorXd::Zero(shape_size(shape_));
}

Tensor::Tensor(Shape shape, Eigen::VectorXd data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw ContractViolation("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string(shape_));
  }
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values) : shape_(std::move(shape)) {
  validate_shape(shape_);
  if (static_cast<Index>(values.size()) != shape_size(shape_)) {
    throw ContractViolation("initializer length does not match shape " + shape_string(shape_));
  }
  data_.resize(static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) data_[i++] = v;
}

Tensor Tensor::constant(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.data_.setConstant(value);
  return t;
}

RowMatrixMap Tensor::matrix(Index rows, Index cols) {
  if (rows * cols != size()) throw ContractViolation("matrix view does not cover tensor");
  return RowMatrixMap(data_.data(), rows, cols);
}

ConstRowMatrixMap Tensor::matrix(Index rows, Index cols) const {
  if (rows * cols != size()) throw ContractViolation("matrix view does not cover tensor");
  return ConstRowMatrixMap(data_.data(), rows, cols);
}

double Tensor::item() const {
  if (size() != 1) throw ContractViolation("item() on non-scalar tensor " + shape_string(shape_));
  return data_[0];
}

}  // namespace gandetect
