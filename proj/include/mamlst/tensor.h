// Copyright 2026 The mamlst Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MAMLST_TENSOR_H_
#define MAMLST_TENSOR_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mamlst/errors.h"

namespace mamlst {

using Shape = std::vector<int64_t>;

std::string ShapeString(const Shape &shape);
int64_t ShapeSize(const Shape &shape);

// Dense row-major array. Values are owned; copies are deep.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), values_(CheckedSize(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (CheckedSize(shape_) != static_cast<int64_t>(values_.size())) {
      throw DimensionError("tensor of shape " + ShapeString(shape_) +
                           " cannot hold " + std::to_string(values_.size()) +
                           " values");
    }
  }

  static Tensor Scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape &shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const { return shape_.at(axis); }
  int64_t size() const { return static_cast<int64_t>(values_.size()); }
  bool empty() const { return values_.empty(); }

  T *data() { return values_.data(); }
  const T *data() const { return values_.data(); }
  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  std::vector<T> &storage() { return values_; }
  const std::vector<T> &storage() const { return values_; }

  T &operator[](int64_t i) { return values_[i]; }
  const T &operator[](int64_t i) const { return values_[i]; }

  // 2-D accessors.
  T &at(int64_t r, int64_t c) { return values_[r * shape_.back() + c]; }
  const T &at(int64_t r, int64_t c) const {
    return values_[r * shape_.back() + c];
  }

  T item() const {
    if (values_.size() != 1) {
      throw ContractError("item() on tensor of shape " + ShapeString(shape_));
    }
    return values_[0];
  }

  // Same values under a new shape of equal size.
  Tensor Reshaped(Shape shape) const { return Tensor(std::move(shape), values_); }

  void Fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  template <typename U>
  Tensor<U> Cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool AllFinite() const {
    for (T v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const Tensor &a, const Tensor &b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  static int64_t CheckedSize(const Shape &shape) {
    for (int64_t d : shape) {
      if (d < 1) {
        throw DimensionError("non-positive extent in shape " +
                             ShapeString(shape));
      }
    }
    return ShapeSize(shape);
  }

  Shape shape_;
  std::vector<T> values_;
};

// Named parameter tensors. std::map keeps keys sorted, which fixes iteration
// order for optimizers, checkpoints and logs.
template <typename T>
using ParamMap = std::map<std::string, Tensor<T>>;

template <typename T>
using GradMap = std::map<std::string, Tensor<T>>;

template <typename U, typename T>
ParamMap<U> CastParams(const ParamMap<T> &params) {
  ParamMap<U> out;
  for (const auto &[name, t] : params) out.emplace(name, t.template Cast<U>());
  return out;
}

// Largest |a - b| over all shared keys; throws on key or shape mismatch.
template <typename T>
double MaxAbsDiff(const ParamMap<T> &a, const ParamMap<T> &b) {
  if (a.size() != b.size()) throw DimensionError("parameter maps differ in keys");
  double worst = 0.0;
  for (const auto &[name, ta] : a) {
    auto it = b.find(name);
    if (it == b.end()) throw DimensionError("missing key " + name);
    if (it->second.shape() != ta.shape()) {
      throw DimensionError("shape mismatch for " + name);
    }
    for (int64_t i = 0; i < ta.size(); ++i) {
      worst = std::max(worst, std::abs(static_cast<double>(ta[i]) -
                                       static_cast<double>(it->second[i])));
    }
  }
  return worst;
}

}  // namespace mamlst

#endif  // MAMLST_TENSOR_H_
