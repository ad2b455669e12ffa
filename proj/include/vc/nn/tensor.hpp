#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace vc::nn {

// Dense row-major tensor of doubles. Rank is dynamic; everything in this
// project is rank 1..3.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), v_(count(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), v_(std::move(values)) {
    if (count(shape_) != v_.size())
      throw std::invalid_argument("Tensor: shape/value size mismatch");
  }

  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<std::size_t> shape, double x) {
    Tensor t(std::move(shape));
    t.fill(x);
    return t;
  }

  static Tensor scalar(double x) { return Tensor({1}, {x}); }

  static Tensor row(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  // 2-D helpers; a rank-1 tensor is treated as a single row.
  std::size_t rows() const { return ndim() <= 1 ? (empty() ? 0 : 1) : shape_[0]; }
  std::size_t cols() const { return ndim() <= 1 ? size() : size() / shape_[0]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  double& at(std::size_t r, std::size_t c) { return v_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return v_[r * cols() + c]; }

  double* row_ptr(std::size_t r) { return v_.data() + r * cols(); }
  const double* row_ptr(std::size_t r) const { return v_.data() + r * cols(); }

  void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const;

  std::string shape_str() const;

 private:
  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> v_;
};

}  // namespace vc::nn
