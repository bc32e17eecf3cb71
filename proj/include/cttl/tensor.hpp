// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cttl/error.hpp"

namespace cttl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

// Dense row-major array (last index fastest). Rank is at least 1.
//
// States are laid out [h, w, c]; convolution kernels [kh, kw, c_in, c_out].
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : dims_{0} {}

  explicit Tensor(Shape dims, T fill = T(0)) : dims_(std::move(dims)) {
    check_rank();
    data_.assign(shape_size(dims_), fill);
  }

  Tensor(Shape dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    check_rank();
    if (data_.size() != shape_size(dims_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match dims " + shape_str(dims_));
  }

  static Tensor zeros(Shape dims) { return Tensor(std::move(dims)); }
  static Tensor ones(Shape dims) { return Tensor(std::move(dims), T(1)); }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= dims_.size())
      throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(dims_));
    return dims_[axis];
  }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t flat) noexcept { return data_[flat]; }
  const T& operator[](std::size_t flat) const noexcept { return data_[flat]; }

  // Bounds-checked multi-index access.
  template <typename... Idx>
  T& at(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  const T& at(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    return offset(std::span<const std::size_t>(idx.begin(), idx.size()));
  }

  std::size_t offset(std::span<const std::size_t> idx) const {
    if (idx.size() != dims_.size())
      throw ShapeError("index of rank " + std::to_string(idx.size()) + " for tensor " +
                       shape_str(dims_));
    std::size_t flat = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      if (idx[a] >= dims_[a])
        throw ShapeError("index " + std::to_string(idx[a]) + " out of range on axis " +
                         std::to_string(a) + " of " + shape_str(dims_));
      flat = flat * dims_[a] + idx[a];
    }
    return flat;
  }

  Tensor reshaped(Shape dims) const {
    return Tensor(std::move(dims), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(dims_, std::move(out));
  }

  bool same_shape(const Tensor& other) const noexcept { return dims_ == other.dims_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  void check_rank() const {
    if (dims_.empty()) throw ShapeError("tensor rank must be at least 1");
  }

  Shape dims_;
  std::vector<T> data_;
};

}  // namespace cttl
