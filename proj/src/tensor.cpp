#include "offrl/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace offrl {

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  int64_t n = shape_size(shape);
  t.shape_ = std::move(shape);
  t.data_.assign(static_cast<size_t>(n), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  Tensor t;
  int64_t n = shape_size(shape);
  t.shape_ = std::move(shape);
  t.data_.assign(static_cast<size_t>(n), value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
  int64_t n = shape_size(shape);
  if (n != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("data size " + std::to_string(data.size()) +
                                " does not match shape " + shape_to_string(shape));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

double Tensor::value() const {
  if (data_.size() != 1)
    throw std::invalid_argument("value() on non-scalar tensor of shape " + shape_str());
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

}  // namespace offrl
