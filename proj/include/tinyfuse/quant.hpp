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

#ifndef TINYFUSE_QUANT_HPP_
#define TINYFUSE_QUANT_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tinyfuse/dataset.hpp"
#include "tinyfuse/model.hpp"

namespace tinyfuse {

// Real value x is represented by q with x = (q - zero_point) * scale.
struct QuantParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;
  bool symmetric = false;

  friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

nlohmann::json qparams_to_json(const QuantParams& qp);
QuantParams qparams_from_json(const nlohmann::json& j);

inline constexpr std::int32_t kInt8Min = -128;
inline constexpr std::int32_t kInt8Max = 127;

// Round half away from zero (std::round semantics), the rounding rule used
// throughout quantization.
inline double round_half_away(double x) { return std::round(x); }

// The range is first widened to contain 0.
QuantParams compute_qparams(double min, double max, bool symmetric);

std::int8_t quantize_value(double x, const QuantParams& qp);
inline double dequantize_value(std::int32_t q, const QuantParams& qp) {
  return static_cast<double>(q - qp.zero_point) * qp.scale;
}
std::vector<std::int8_t> quantize_tensor(std::span<const float> values,
                                         const QuantParams& qp);
std::vector<float> dequantize_tensor(std::span<const std::int8_t> values,
                                     const QuantParams& qp);

// Fixed-point form M = m0 * 2^(-31 - shift) with m0 in [2^30, 2^31).
struct Multiplier {
  std::int32_t m0 = 1 << 30;
  int shift = 0;
  double real = 0.5;

  friend bool operator==(const Multiplier&, const Multiplier&) = default;
};

Multiplier quantize_multiplier(double real);

struct Range {
  float min = 0;
  float max = 0;
};

// Running min/max per activation edge, always containing 0. Edges are node
// outputs plus one "<node>/dw" edge per SeparableConv2D.
struct CalibrationStats {
  std::vector<std::string> edges;
  std::vector<Range> ranges;
  std::size_t samples = 0;

  std::optional<std::size_t> find(const std::string& edge) const;
  const Range& at(const std::string& edge) const;
  void merge(const CalibrationStats& other);
  nlohmann::json to_json() const;
};

inline constexpr std::size_t kDefaultCalibrationSamples = 256;

CalibrationStats calibrate(const FloatModel& model, const Dataset& data,
                           const std::vector<std::size_t>& samples,
                           std::size_t threads = 0);
// The first kDefaultCalibrationSamples samples of the train split.
CalibrationStats calibrate(const FloatModel& model, const Dataset& data);

// One quantized parameter tensor: int8 weights (symmetric, per tensor) or
// int32 biases at scale input_scale * weight_scale.
struct QuantTensor {
  std::string name;
  TensorShape shape;
  bool is_bias = false;
  QuantParams qp;
  std::vector<std::int8_t> q8;
  std::vector<std::int32_t> q32;

  std::size_t size() const { return is_bias ? q32.size() : q8.size(); }
};

struct QuantizedModel {
  Graph graph;
  ShapeMap shapes;
  std::vector<QuantParams> activations;               // per node output
  std::vector<std::optional<QuantParams>> depthwise;  // SeparableConv2D only
  std::vector<std::vector<QuantTensor>> params;       // param_tensors order
  // Conv2D/Dense: [output]; SeparableConv2D: [depthwise, pointwise];
  // Concat: one rescale per input; others: none.
  std::vector<std::vector<Multiplier>> multipliers;
  nlohmann::json metadata = nlohmann::json::object();

  // Checks structure, multiplier ranges and the int32 accumulator bound.
  void validate() const;
};

// Largest |accumulator| a node can produce: fan_in * 255 * 127 + max |bias|.
std::int64_t accumulator_bound(const QuantizedModel& model, std::size_t node);

QuantizedModel quantize_model(const FloatModel& model, const CalibrationStats& stats);

// Float model whose parameters are the dequantized int8/int32 values.
FloatModel dequantized_model(const QuantizedModel& model);

}  // namespace tinyfuse

#endif  // TINYFUSE_QUANT_HPP_
