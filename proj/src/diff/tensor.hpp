// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "common/error.hpp"

namespace ncsl::diff {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <class T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::int64_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s);

// Dense row-major array. Scalars are stored with shape {1}.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate();
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), fill);
  }
  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate();
    NCSL_CHECK(static_cast<std::int64_t>(data_.size()) == shape_size(shape_), ShapeError,
               "tensor data length ", data_.size(), " does not match shape ", shape_str(shape_));
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* ptr() { return data_.data(); }
  const T* ptr() const { return data_.data(); }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T item() const {
    NCSL_CHECK(data_.size() == 1, ShapeError, "item() on tensor of shape ", shape_str(shape_));
    return data_[0];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape s) const {
    Tensor out;
    out.shape_ = std::move(s);
    out.validate();
    NCSL_CHECK(shape_size(out.shape_) == static_cast<std::int64_t>(data_.size()), ShapeError,
               "cannot reshape ", shape_str(shape_), " to ", shape_str(out.shape_));
    out.data_ = data_;
    return out;
  }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool operator==(const Tensor& o) const = default;

 private:
  void validate() const {
    for (auto e : shape_) {
      NCSL_CHECK(e > 0, ShapeError, "tensor extents must be positive, got ", shape_str(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

template <class T>
bool all_finite(std::span<const T> v) {
  for (T x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

// A trainable array or a non-trainable buffer (batch-norm running stats).
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = true;

  Parameter(std::string n, Tensor<T> v, bool trainable = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), requires_grad(trainable) {}

  void zero_grad() { grad.fill(T{0}); }
};

}  // namespace ncsl::diff
