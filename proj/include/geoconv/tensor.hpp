// Copyright 2026 The GeoConv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "geoconv/errors.hpp"

namespace geoconv {

/// Dense NCHW tensor. Every dimension is positive.
template <class T>
class Tensor {
 public:
  using Shape = std::array<std::size_t, 4>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(checked(shape)), data_(count(shape_), fill) {}
  Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
      : Tensor(Shape{n, c, h, w}, fill) {}

  const Shape& shape() const { return shape_; }
  std::size_t batch() const { return shape_[0]; }
  std::size_t channels() const { return shape_[1]; }
  std::size_t height() const { return shape_[2]; }
  std::size_t width() const { return shape_[3]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return ((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }
  T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) { return data_[offset(n, c, y, x)]; }
  const T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[offset(n, c, y, x)];
  }

  /// Pointer to the start of sample n.
  T* sample(std::size_t n) { return data_.data() + n * shape_[1] * shape_[2] * shape_[3]; }
  const T* sample(std::size_t n) const { return data_.data() + n * shape_[1] * shape_[2] * shape_[3]; }
  std::size_t sampleSize() const { return shape_[1] * shape_[2] * shape_[3]; }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const {
    if (count(checked(shape)) != data_.size()) throw ShapeError("reshape changes element count");
    Tensor t;
    t.shape_ = shape;
    t.data_ = data_;
    return t;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Tensor&) const = default;

  static std::string describe(const Shape& s) {
    return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]) + "x" +
           std::to_string(s[3]);
  }

 private:
  static Shape checked(const Shape& s) {
    for (auto d : s)
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + describe(s));
    return s;
  }
  static std::size_t count(const Shape& s) { return s[0] * s[1] * s[2] * s[3]; }

  Shape shape_{0, 0, 0, 0};
  std::vector<T> data_;
};

}  // namespace geoconv
