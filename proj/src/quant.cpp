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

#include "tinyfuse/quant.hpp"

#include <algorithm>
#include <limits>

#include "tinyfuse/error.hpp"
#include "tinyfuse/executor.hpp"
#include "tinyfuse/parallel.hpp"
#include "tinyfuse/train.hpp"

namespace tinyfuse {

nlohmann::json qparams_to_json(const QuantParams& qp) {
  return {{"scale", qp.scale}, {"zero_point", qp.zero_point}, {"symmetric", qp.symmetric}};
}

QuantParams qparams_from_json(const nlohmann::json& j) {
  QuantParams qp;
  qp.scale = j.at("scale").get<double>();
  qp.zero_point = j.at("zero_point").get<std::int32_t>();
  qp.symmetric = j.at("symmetric").get<bool>();
  if (!(qp.scale > 0) || !std::isfinite(qp.scale) || qp.zero_point < kInt8Min ||
      qp.zero_point > kInt8Max || (qp.symmetric && qp.zero_point != 0)) {
    fail(ErrorCode::kFormat, "invalid quantization parameters");
  }
  return qp;
}

QuantParams compute_qparams(double min, double max, bool symmetric) {
  if (!std::isfinite(min) || !std::isfinite(max)) {
    fail(ErrorCode::kNumeric, "quantization range must be finite");
  }
  if (min > max) {
    fail(ErrorCode::kInvalidArgument, "quantization range has min > max");
  }
  min = std::min(min, 0.0);
  max = std::max(max, 0.0);
  QuantParams qp;
  qp.symmetric = symmetric;
  if (min == 0.0 && max == 0.0) return qp;
  if (symmetric) {
    qp.scale = std::max(std::abs(min), std::abs(max)) / 127.0;
    qp.zero_point = 0;
  } else {
    qp.scale = (max - min) / 255.0;
    const double zp = round_half_away(-128.0 - min / qp.scale);
    qp.zero_point = static_cast<std::int32_t>(
        std::clamp(zp, static_cast<double>(kInt8Min), static_cast<double>(kInt8Max)));
  }
  return qp;
}

std::int8_t quantize_value(double x, const QuantParams& qp) {
  const double q = round_half_away(x / qp.scale) + qp.zero_point;
  return static_cast<std::int8_t>(
      std::clamp(q, static_cast<double>(kInt8Min), static_cast<double>(kInt8Max)));
}

std::vector<std::int8_t> quantize_tensor(std::span<const float> values,
                                         const QuantParams& qp) {
  std::vector<std::int8_t> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = quantize_value(values[i], qp);
  return out;
}

std::vector<float> dequantize_tensor(std::span<const std::int8_t> values,
                                     const QuantParams& qp) {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<float>(dequantize_value(values[i], qp));
  }
  return out;
}

Multiplier quantize_multiplier(double real) {
  if (!(real > 0) || !std::isfinite(real)) {
    fail(ErrorCode::kNumeric, "requantization multiplier must be finite and > 0");
  }
  int exponent = 0;
  const double fraction = std::frexp(real, &exponent);  // [0.5, 1)
  auto m0 = static_cast<std::int64_t>(round_half_away(std::ldexp(fraction, 31)));
  if (m0 == (std::int64_t{1} << 31)) {
    m0 /= 2;
    ++exponent;
  }
  Multiplier m;
  m.m0 = static_cast<std::int32_t>(m0);
  m.shift = -exponent;
  m.real = real;
  if (31 + m.shift < 1 || 31 + m.shift > 62) {
    fail(ErrorCode::kNumeric,
         "requantization multiplier " + std::to_string(real) + " is out of range");
  }
  return m;
}

std::optional<std::size_t> CalibrationStats::find(const std::string& edge) const {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i] == edge) return i;
  }
  return std::nullopt;
}

const Range& CalibrationStats::at(const std::string& edge) const {
  const auto i = find(edge);
  if (!i) fail(ErrorCode::kInvalidArgument, "no calibration statistics for edge '" + edge + "'");
  return ranges[*i];
}

void CalibrationStats::merge(const CalibrationStats& other) {
  if (edges != other.edges) {
    fail(ErrorCode::kInvalidArgument, "cannot merge statistics over different edges");
  }
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    ranges[i].min = std::min(ranges[i].min, other.ranges[i].min);
    ranges[i].max = std::max(ranges[i].max, other.ranges[i].max);
  }
  samples += other.samples;
}

nlohmann::json CalibrationStats::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    j[edges[i]] = {{"min", ranges[i].min}, {"max", ranges[i].max}};
  }
  return {{"samples", samples}, {"edges", j}};
}

namespace {

CalibrationStats empty_stats(const Graph& g) {
  CalibrationStats s;
  for (const auto& n : g.nodes) {
    s.edges.push_back(n.name);
    if (n.spec.kind == LayerKind::kSeparableConv2D) s.edges.push_back(n.name + "/dw");
  }
  s.ranges.assign(s.edges.size(), Range{});
  return s;
}

void observe(Range& r, std::span<const float> values) {
  for (float v : values) {
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
  }
}

bool has_params(LayerKind k) {
  return k == LayerKind::kConv2D || k == LayerKind::kSeparableConv2D ||
         k == LayerKind::kDense;
}

}  // namespace

CalibrationStats calibrate(const FloatModel& model, const Dataset& data,
                           const std::vector<std::size_t>& samples, std::size_t threads) {
  if (samples.empty()) fail(ErrorCode::kInvalidArgument, "calibration set is empty");
  const InputBinder binder(model.graph, model.shapes, data);
  const std::size_t workers =
      std::min(samples.size(), threads == 0 ? default_thread_count() : threads);
  std::vector<CalibrationStats> partial(workers, empty_stats(model.graph));
  parallel_for(workers, workers, [&](std::size_t w) {
    CalibrationStats& s = partial[w];
    std::vector<FloatTensor> inputs;
    for (std::size_t i = w; i < samples.size(); i += workers) {
      binder.gather(data, samples[i], inputs);
      const auto acts = forward<float>(model, std::span<const FloatTensor>(inputs));
      std::size_t e = 0;
      for (std::size_t n = 0; n < model.graph.nodes.size(); ++n) {
        observe(s.ranges[e++], acts.outputs[n].span());
        if (model.graph.nodes[n].spec.kind == LayerKind::kSeparableConv2D) {
          observe(s.ranges[e++], acts.depthwise[n].span());
        }
      }
      ++s.samples;
    }
  });
  CalibrationStats out = std::move(partial[0]);
  for (std::size_t w = 1; w < workers; ++w) out.merge(partial[w]);
  return out;
}

CalibrationStats calibrate(const FloatModel& model, const Dataset& data) {
  const std::size_t n = std::min(kDefaultCalibrationSamples, data.train.size());
  return calibrate(model, data,
                   std::vector<std::size_t>(data.train.begin(), data.train.begin() + n));
}

std::int64_t accumulator_bound(const QuantizedModel& model, std::size_t node) {
  const Node& n = model.graph.nodes[node];
  auto bias_max = [](const QuantTensor& t) {
    std::int64_t m = 0;
    for (auto v : t.q32) m = std::max<std::int64_t>(m, std::abs(static_cast<std::int64_t>(v)));
    return m;
  };
  constexpr std::int64_t kPerMac = 255 * 127;
  const auto& in = model.shapes[n.inputs.empty() ? node : n.inputs[0]];
  const std::int64_t k = n.spec.kernel;
  switch (n.spec.kind) {
    case LayerKind::kConv2D:
      return k * k * in.channels() * kPerMac + bias_max(model.params[node][1]);
    case LayerKind::kSeparableConv2D:
      return std::max(k * k * kPerMac + bias_max(model.params[node][1]),
                      in.channels() * kPerMac + bias_max(model.params[node][3]));
    case LayerKind::kDense:
      return in.channels() * kPerMac + bias_max(model.params[node][1]);
    default:
      return 0;
  }
}

void QuantizedModel::validate() const {
  validate_graph(graph);
  const std::size_t n = graph.nodes.size();
  if (shapes.size() != n || activations.size() != n || depthwise.size() != n ||
      params.size() != n || multipliers.size() != n) {
    fail(ErrorCode::kFormat, "quantized model tables do not match graph '" + graph.name + "'");
  }
  if (!(infer_shapes(graph) == shapes)) {
    fail(ErrorCode::kShapeMismatch, "quantized model shapes disagree with its graph");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = graph.nodes[i];
    const auto expected = param_tensors(graph, shapes, i);
    if (expected.size() != params[i].size()) {
      fail(ErrorCode::kFormat, "node '" + node.name + "' has the wrong parameter count");
    }
    for (std::size_t t = 0; t < expected.size(); ++t) {
      const auto& q = params[i][t];
      if (q.is_bias != expected[t].is_bias || !(q.shape == expected[t].shape) ||
          q.size() != expected[t].shape.element_count() ||
          (q.is_bias ? !q.q8.empty() : !q.q32.empty())) {
        fail(ErrorCode::kFormat, "parameter '" + node.name + "/" + expected[t].name +
                                     "' does not match its declared shape or type");
      }
    }
    std::size_t want = 0;
    switch (node.spec.kind) {
      case LayerKind::kConv2D:
      case LayerKind::kDense:
        want = 1;
        break;
      case LayerKind::kSeparableConv2D:
        want = 2;
        break;
      case LayerKind::kConcat:
        want = node.inputs.size();
        break;
      default:
        break;
    }
    if (multipliers[i].size() != want) {
      fail(ErrorCode::kFormat, "node '" + node.name + "' has the wrong multiplier count");
    }
    for (const auto& m : multipliers[i]) {
      if (m.m0 < (1 << 30) || 31 + m.shift < 1 || 31 + m.shift > 62) {
        fail(ErrorCode::kFormat, "node '" + node.name + "' has an invalid multiplier");
      }
    }
    if ((node.spec.kind == LayerKind::kSeparableConv2D) != depthwise[i].has_value()) {
      fail(ErrorCode::kFormat, "node '" + node.name + "' depthwise parameters are inconsistent");
    }
    if (accumulator_bound(*this, i) >= (std::int64_t{1} << 31)) {
      fail(ErrorCode::kNumeric, "node '" + node.name +
                                    "' can overflow the int32 accumulator (bound " +
                                    std::to_string(accumulator_bound(*this, i)) + ")");
    }
  }
}

namespace {

QuantTensor quantize_weight(const ParamTensorInfo& info, const FloatTensor& w) {
  QuantTensor q;
  q.name = info.name;
  q.shape = info.shape;
  float lo = 0, hi = 0;
  for (float v : w.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  q.qp = compute_qparams(lo, hi, true);
  q.q8 = quantize_tensor(w.span(), q.qp);
  return q;
}

QuantTensor quantize_bias(const ParamTensorInfo& info, const FloatTensor& b,
                          double input_scale, double weight_scale) {
  QuantTensor q;
  q.name = info.name;
  q.shape = info.shape;
  q.is_bias = true;
  q.qp.scale = input_scale * weight_scale;
  q.qp.symmetric = true;
  q.q32.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double v = round_half_away(b.data[i] / q.qp.scale);
    if (std::abs(v) >= 2147483647.0) {
      fail(ErrorCode::kNumeric, "bias '" + info.name + "' overflows int32 at scale " +
                                    std::to_string(q.qp.scale));
    }
    q.q32[i] = static_cast<std::int32_t>(v);
  }
  return q;
}

}  // namespace

QuantizedModel quantize_model(const FloatModel& model, const CalibrationStats& stats) {
  validate_model(model);
  const Graph& g = model.graph;
  const std::size_t n = g.nodes.size();
  QuantizedModel q;
  q.graph = g;
  q.shapes = model.shapes;
  q.activations.resize(n);
  q.depthwise.resize(n);
  q.params.resize(n);
  q.multipliers.resize(n);
  q.metadata = model.metadata;

  const auto all_consumers = g.consumers();
  auto edge_qp = [&](const std::string& edge) {
    const Range& r = stats.at(edge);
    return compute_qparams(r.min, r.max, false);
  };

  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = g.nodes[i];
    switch (node.spec.kind) {
      case LayerKind::kInput:
      case LayerKind::kConcat:
        q.activations[i] = edge_qp(node.name);
        break;
      case LayerKind::kSoftmax:
        // Probabilities are produced in float; this entry only documents
        // the [0, 1] output range.
        q.activations[i] = compute_qparams(0.0, 1.0, false);
        break;
      case LayerKind::kConv2D:
      case LayerKind::kSeparableConv2D:
      case LayerKind::kDense: {
        const auto& consumers = all_consumers[i];
        const bool fused = consumers.size() == 1 &&
                           g.nodes[consumers[0]].spec.kind == LayerKind::kReLU;
        q.activations[i] = edge_qp(fused ? g.nodes[consumers[0]].name : node.name);
        break;
      }
      case LayerKind::kReLU:
      case LayerKind::kMaxPool2D:
      case LayerKind::kAvgPool2D:
      case LayerKind::kFlatten:
        q.activations[i] = q.activations[node.inputs[0]];
        break;
    }
    if (has_params(node.spec.kind)) {
      const auto infos = param_tensors(g, model.shapes, i);
      const auto& p = model.params[i];
      const double s_in = q.activations[node.inputs[0]].scale;
      const double s_out = q.activations[i].scale;
      if (node.spec.kind == LayerKind::kSeparableConv2D) {
        q.depthwise[i] = edge_qp(node.name + "/dw");
        const double s_mid = q.depthwise[i]->scale;
        QuantTensor dw = quantize_weight(infos[0], p[0]);
        QuantTensor dwb = quantize_bias(infos[1], p[1], s_in, dw.qp.scale);
        QuantTensor pw = quantize_weight(infos[2], p[2]);
        QuantTensor pwb = quantize_bias(infos[3], p[3], s_mid, pw.qp.scale);
        q.multipliers[i] = {quantize_multiplier(s_in * dw.qp.scale / s_mid),
                            quantize_multiplier(s_mid * pw.qp.scale / s_out)};
        q.params[i] = {std::move(dw), std::move(dwb), std::move(pw), std::move(pwb)};
      } else {
        QuantTensor w = quantize_weight(infos[0], p[0]);
        QuantTensor b = quantize_bias(infos[1], p[1], s_in, w.qp.scale);
        q.multipliers[i] = {quantize_multiplier(s_in * w.qp.scale / s_out)};
        q.params[i] = {std::move(w), std::move(b)};
      }
    } else if (node.spec.kind == LayerKind::kConcat) {
      for (std::size_t pred : node.inputs) {
        q.multipliers[i].push_back(
            quantize_multiplier(q.activations[pred].scale / q.activations[i].scale));
      }
    }
  }
  q.metadata["calibration_samples"] = stats.samples;
  q.validate();
  return q;
}

FloatModel dequantized_model(const QuantizedModel& model) {
  FloatModel f;
  f.graph = model.graph;
  f.shapes = model.shapes;
  f.metadata = model.metadata;
  f.params.resize(model.params.size());
  for (std::size_t n = 0; n < model.params.size(); ++n) {
    for (const auto& t : model.params[n]) {
      FloatTensor out(t.shape);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const std::int32_t v = t.is_bias ? t.q32[i] : t.q8[i];
        out.data[i] = static_cast<float>(dequantize_value(v, t.qp));
      }
      f.params[n].push_back(std::move(out));
    }
  }
  return f;
}

}  // namespace tinyfuse
