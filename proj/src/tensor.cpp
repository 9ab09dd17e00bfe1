#include "hyperflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hyperflow {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {
  if (shape_.size() > 2) throw std::invalid_argument("tensor rank above 2");
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_.size() > 2) throw std::invalid_argument("tensor rank above 2");
  if (shape_product(shape_) != data_.size()) {
    throw std::invalid_argument("tensor shape " + shape_string(shape_) +
                                " does not match buffer of " +
                                std::to_string(data_.size()));
  }
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols});
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, value));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::zeros_like(const Tensor& other) { return Tensor(other.shape_); }

Tensor Tensor::uninitialized(std::size_t rows, std::size_t cols) {
  Tensor t;
  t.shape_ = {rows, cols};
  t.data_.resize(rows * cols);
  return t;
}

Tensor Tensor::uninitialized_like(const Tensor& other) {
  Tensor t;
  t.shape_ = other.shape_;
  t.data_.resize(other.data_.size());
  return t;
}

bool Tensor::same_shape(const Tensor& other) const {
  return rows() == other.rows() && cols() == other.cols();
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw std::invalid_argument("item() on tensor of shape " +
                                shape_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  Tensor t(std::move(shape));
  if (t.size() != data_.size()) {
    throw std::invalid_argument("reshape of " + shape_string(shape_) +
                                " to " + shape_string(t.shape_));
  }
  t.data_ = data_;
  return t;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

}  // namespace hyperflow
