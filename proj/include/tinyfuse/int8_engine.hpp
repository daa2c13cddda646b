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

#ifndef TINYFUSE_INT8_ENGINE_HPP_
#define TINYFUSE_INT8_ENGINE_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tinyfuse/dataset.hpp"
#include "tinyfuse/quant.hpp"

namespace tinyfuse {

struct Int8Tensor {
  TensorShape shape;
  std::vector<std::int8_t> data;
  QuantParams qp;
};

// clamp(round_half_away(acc * m0 * 2^(-31 - shift)) + zero_point) in 64-bit
// integer arithmetic.
inline std::int8_t requantize(std::int64_t acc, std::int32_t m0, int shift,
                              std::int32_t zero_point) {
  const std::int64_t prod = acc * static_cast<std::int64_t>(m0);
  const int total = 31 + shift;
  const std::int64_t mag = prod < 0 ? -prod : prod;
  std::int64_t r = (mag + (std::int64_t{1} << (total - 1))) >> total;
  if (prod < 0) r = -r;
  r += zero_point;
  if (r < kInt8Min) r = kInt8Min;
  if (r > kInt8Max) r = kInt8Max;
  return static_cast<std::int8_t>(r);
}

inline std::int8_t requantize(std::int64_t acc, const Multiplier& m,
                              std::int32_t zero_point) {
  return requantize(acc, m.m0, m.shift, zero_point);
}

Int8Tensor relu_int8(const Int8Tensor& t);

// Channel-axis concatenation; inputs whose parameters differ from target are
// rescaled through requantize.
Int8Tensor concat_int8(std::span<const Int8Tensor> inputs, const QuantParams& target);

Int8Tensor quantize_input(std::span<const float> values, const TensorShape& shape,
                          const QuantParams& qp);

struct Int8Result {
  std::vector<std::int8_t> logits;   // classifier output, int8
  std::vector<float> real_logits;    // dequantized
  std::vector<float> probabilities;  // float softmax of real_logits
  std::size_t top1 = 0;
};

// Runs the model in integer arithmetic. inputs follow graph input order and
// must carry the model's input parameters. order, when non-empty, is an
// alternative topological execution order over all nodes.
Int8Result infer_int8(const QuantizedModel& model, std::span<const Int8Tensor> inputs,
                      const std::vector<std::size_t>& order = {});
Int8Result infer_int8(const QuantizedModel& model,
                      const std::map<std::string, Int8Tensor>& inputs);

// Quantizes one dataset sample with the model's input parameters.
std::vector<Int8Tensor> quantize_sample(const QuantizedModel& model, const Dataset& data,
                                        std::size_t sample);

struct Int8Evaluation {
  double accuracy = 0;
  std::size_t total = 0;
  std::vector<int> predictions;
};

Int8Evaluation evaluate_int8(const QuantizedModel& model, const Dataset& data, Split split,
                             std::size_t threads = 0);

}  // namespace tinyfuse

#endif  // TINYFUSE_INT8_ENGINE_HPP_
