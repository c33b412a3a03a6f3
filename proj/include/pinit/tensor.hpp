#pragma once

#include <cassert>
#include <cstddef>
#include <string>
#include <vector>

namespace pinit {

// Renders a shape as "[4x3x2]" for error messages.
std::string shape_string(const std::vector<size_t>& shape);

// Dense row-major array of 64-bit floats with a dynamic shape.
// All training math runs in doubles; bounds checks compile away in
// release builds.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape, double fill = 0.0);
  static Tensor from_data(std::vector<size_t> shape, std::vector<double> data);

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  size_t dim(size_t i) const {
    assert(i < shape_.size());
    return shape_[i];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  double& operator[](size_t i) {
    assert(i < data_.size());
    return data_[i];
  }
  double operator[](size_t i) const {
    assert(i < data_.size());
    return data_[i];
  }

  double& at(size_t i) {
    assert(rank() == 1 && i < shape_[0]);
    return data_[i];
  }
  double& at(size_t i, size_t j) {
    assert(rank() == 2 && i < shape_[0] && j < shape_[1]);
    return data_[i * shape_[1] + j];
  }
  double& at(size_t i, size_t j, size_t k) {
    assert(rank() == 3 && i < shape_[0] && j < shape_[1] && k < shape_[2]);
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& at(size_t i, size_t j, size_t k, size_t l) {
    assert(rank() == 4 && i < shape_[0] && j < shape_[1] && k < shape_[2] &&
           l < shape_[3]);
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double at(size_t i) const { return const_cast<Tensor*>(this)->at(i); }
  double at(size_t i, size_t j) const {
    return const_cast<Tensor*>(this)->at(i, j);
  }
  double at(size_t i, size_t j, size_t k) const {
    return const_cast<Tensor*>(this)->at(i, j, k);
  }
  double at(size_t i, size_t j, size_t k, size_t l) const {
    return const_cast<Tensor*>(this)->at(i, j, k, l);
  }

  void fill(double value);
  double min() const;
  double max() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Same data, new shape; element counts must agree.
  Tensor reshaped(std::vector<size_t> shape) const;

 private:
  std::vector<size_t> shape_;
  std::vector<double> data_;
};

// Standard matrix product of two rank-2 tensors. Throws ShapeError when the
// inner dimensions disagree.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor identity(size_t n);

}  // namespace pinit
