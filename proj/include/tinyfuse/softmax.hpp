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

#ifndef TINYFUSE_SOFTMAX_HPP_
#define TINYFUSE_SOFTMAX_HPP_

#include <algorithm>
#include <cmath>
#include <span>

namespace tinyfuse {

// exp(z_i / T) / sum_j exp(z_j / T), evaluated as exp((z_i - max z) / T).
// The plain softmax is this function at T = 1.
template <typename T>
void softmax_with_temperature(std::span<const T> logits, T temperature,
                              std::span<T> out) {
  const T top = *std::max_element(logits.begin(), logits.end());
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - top) / temperature);
    sum += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= sum;
}

template <typename T>
void softmax(std::span<const T> logits, std::span<T> out) {
  softmax_with_temperature<T>(logits, T(1), out);
}

template <typename T>
std::size_t argmax(std::span<const T> values) {
  return static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace tinyfuse

#endif  // TINYFUSE_SOFTMAX_HPP_
