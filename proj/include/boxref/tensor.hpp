#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace boxref {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

/// Dense row-major n-d array. Images are CxHxW, batches NxCxHxW.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), T(0)) {}
  Tensor(Shape shape, T value) : shape_(std::move(shape)), data_(shape_numel(shape_), value) {}

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const {
    assert(i >= 0 && i < ndim());
    return shape_[static_cast<std::size_t>(i)];
  }
  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](std::size_t i) {
    assert(i < data_.size());
    return data_[i];
  }
  const T& operator[](std::size_t i) const {
    assert(i < data_.size());
    return data_[i];
  }

  template <typename... Idx>
  T& operator()(Idx... idx) {
    return data_[offset(idx...)];
  }
  template <typename... Idx>
  const T& operator()(Idx... idx) const {
    return data_[offset(idx...)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void set_zero() { fill(T(0)); }

  /// Same data, new shape; element count must match.
  Tensor reshaped(Shape s) const {
    if (shape_numel(s) != numel())
      throw std::invalid_argument("tensor: reshape " + shape_str(shape_) + " -> " + shape_str(s));
    Tensor out;
    out.shape_ = std::move(s);
    out.data_ = data_;
    return out;
  }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

 private:
  template <typename... Idx>
  std::size_t offset(Idx... idx) const {
    assert(sizeof...(Idx) == shape_.size());
    const int is[] = {static_cast<int>(idx)...};
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizeof...(Idx); ++k) {
      assert(is[k] >= 0 && is[k] < shape_[k]);
      off = off * static_cast<std::size_t>(shape_[k]) + static_cast<std::size_t>(is[k]);
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Map a contiguous tensor (or a slice starting at `ptr`) as a rows x cols row-major matrix.
template <typename T>
Eigen::Map<MatRM<T>> map_matrix(T* ptr, int rows, int cols) {
  return Eigen::Map<MatRM<T>>(ptr, rows, cols);
}
template <typename T>
Eigen::Map<const MatRM<T>> map_matrix(const T* ptr, int rows, int cols) {
  return Eigen::Map<const MatRM<T>>(ptr, rows, cols);
}

template <typename T>
Eigen::Map<MatRM<T>> map_matrix(Tensor<T>& t, int rows, int cols) {
  assert(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) == t.numel());
  return Eigen::Map<MatRM<T>>(t.data(), rows, cols);
}
template <typename T>
Eigen::Map<const MatRM<T>> map_matrix(const Tensor<T>& t, int rows, int cols) {
  assert(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) == t.numel());
  return Eigen::Map<const MatRM<T>>(t.data(), rows, cols);
}

/// Copy sample i out of a batched (N, ...) tensor, dropping the batch axis.
template <typename T>
Tensor<T> take_sample(const Tensor<T>& t, int i) {
  assert(t.ndim() >= 2 && i >= 0 && i < t.dim(0));
  Shape s(t.shape().begin() + 1, t.shape().end());
  Tensor<T> out(s);
  const std::size_t n = out.numel();
  std::copy(t.data() + static_cast<std::size_t>(i) * n,
            t.data() + static_cast<std::size_t>(i + 1) * n, out.data());
  return out;
}

/// Write `sample` (shape = t.shape()[1:]) into slot i of batched tensor t.
template <typename T>
void put_sample(Tensor<T>& t, int i, const Tensor<T>& sample) {
  const std::size_t n = sample.numel();
  assert(t.numel() == n * static_cast<std::size_t>(t.dim(0)));
  std::copy(sample.data(), sample.data() + n, t.data() + static_cast<std::size_t>(i) * n);
}

template <typename T>
void add_sample(Tensor<T>& t, int i, const Tensor<T>& sample) {
  const std::size_t n = sample.numel();
  assert(t.numel() == n * static_cast<std::size_t>(t.dim(0)));
  T* dst = t.data() + static_cast<std::size_t>(i) * n;
  for (std::size_t k = 0; k < n; ++k) dst[k] += sample[k];
}

}  // namespace boxref
