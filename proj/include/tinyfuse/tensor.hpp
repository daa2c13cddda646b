/* Copyright 2026 The tinyfuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef TINYFUSE_TENSOR_HPP_
#define TINYFUSE_TENSOR_HPP_

#include <cmath>
#include <span>
#include <vector>

#include "tinyfuse/shape.hpp"

namespace tinyfuse {

// Dense row-major (channels-last) tensor.
template <typename T>
struct Tensor {
  TensorShape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(TensorShape s, T fill = T{})
      : shape(std::move(s)), data(shape.element_count(), fill) {}
  Tensor(TensorShape s, std::vector<T> values)
      : shape(std::move(s)), data(std::move(values)) {}

  std::size_t size() const { return data.size(); }
  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using FloatTensor = Tensor<float>;

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace tinyfuse

#endif  // TINYFUSE_TENSOR_HPP_
