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

#include "tinyfuse/int8_engine.hpp"

#include <algorithm>

#include "tinyfuse/error.hpp"
#include "tinyfuse/kernels.hpp"
#include "tinyfuse/parallel.hpp"
#include "tinyfuse/softmax.hpp"

namespace tinyfuse {

Int8Tensor relu_int8(const Int8Tensor& t) {
  Int8Tensor out = t;
  const auto zp = static_cast<std::int8_t>(t.qp.zero_point);
  for (auto& v : out.data) v = std::max(v, zp);
  return out;
}

Int8Tensor concat_int8(std::span<const Int8Tensor> inputs, const QuantParams& target) {
  if (inputs.empty()) fail(ErrorCode::kInvalidArgument, "concat needs inputs");
  const TensorShape& first = inputs[0].shape;
  std::vector<std::int64_t> dims = first.dims();
  std::int64_t channels = 0;
  for (const auto& t : inputs) {
    if (t.shape.rank() != first.rank() ||
        !std::equal(first.dims().begin(), first.dims().end() - 1, t.shape.dims().begin())) {
      fail(ErrorCode::kShapeMismatch, "cannot concatenate " + first.to_string() + " and " +
                                          t.shape.to_string());
    }
    channels += t.shape.channels();
  }
  dims.back() = channels;
  Int8Tensor out;
  out.shape = TensorShape(dims);
  out.qp = target;
  out.data.resize(out.shape.element_count());
  const std::size_t rows = out.data.size() / static_cast<std::size_t>(channels);
  std::size_t offset = 0;
  for (const auto& t : inputs) {
    const std::size_t c = t.shape.channels();
    const bool same = t.qp.scale == target.scale && t.qp.zero_point == target.zero_point;
    const Multiplier m = same ? Multiplier{} : quantize_multiplier(t.qp.scale / target.scale);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < c; ++k) {
        const std::int8_t v = t.data[r * c + k];
        out.data[r * channels + offset + k] =
            same ? v : requantize(v - t.qp.zero_point, m, target.zero_point);
      }
    }
    offset += c;
  }
  return out;
}

Int8Tensor quantize_input(std::span<const float> values, const TensorShape& shape,
                          const QuantParams& qp) {
  if (values.size() != shape.element_count()) {
    fail(ErrorCode::kShapeMismatch, "input values do not match shape " + shape.to_string());
  }
  return {shape, quantize_tensor(values, qp), qp};
}

namespace {

// Accumulates (x - zp) * w over the window into acc[cout], starting from the
// biases, then requantizes.
void conv_int8(const std::vector<std::int32_t>& x, const std::vector<std::int8_t>& w,
               const std::vector<std::int32_t>& bias, const kernels::WindowOp& op,
               const Multiplier& m, std::int32_t out_zp, std::vector<std::int8_t>& out) {
  std::vector<std::int32_t> acc(op.out_c);
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      std::copy(bias.begin(), bias.end(), acc.begin());
      for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
        const std::int64_t iy = oy * op.stride + ky - op.pad_top;
        if (iy < 0 || iy >= op.in_h) continue;
        for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
          const std::int64_t ix = ox * op.stride + kx - op.pad_left;
          if (ix < 0 || ix >= op.in_w) continue;
          const std::int32_t* xp = &x[(iy * op.in_w + ix) * op.in_c];
          const std::int8_t* wp = &w[((ky * op.kernel + kx) * op.in_c) * op.out_c];
          for (std::int64_t ci = 0; ci < op.in_c; ++ci) {
            const std::int32_t xv = xp[ci];
            if (xv == 0) continue;
            const std::int8_t* wr = wp + ci * op.out_c;
            for (std::int64_t co = 0; co < op.out_c; ++co) acc[co] += xv * wr[co];
          }
        }
      }
      std::int8_t* o = &out[(oy * op.out_w + ox) * op.out_c];
      for (std::int64_t co = 0; co < op.out_c; ++co) o[co] = requantize(acc[co], m, out_zp);
    }
  }
}

void depthwise_int8(const std::vector<std::int32_t>& x, const std::vector<std::int8_t>& w,
                    const std::vector<std::int32_t>& bias, const kernels::WindowOp& op,
                    const Multiplier& m, std::int32_t out_zp, std::vector<std::int8_t>& out) {
  for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
    for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
      for (std::int64_t c = 0; c < op.in_c; ++c) {
        std::int32_t acc = bias[c];
        for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
          const std::int64_t iy = oy * op.stride + ky - op.pad_top;
          if (iy < 0 || iy >= op.in_h) continue;
          for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
            const std::int64_t ix = ox * op.stride + kx - op.pad_left;
            if (ix < 0 || ix >= op.in_w) continue;
            acc += x[(iy * op.in_w + ix) * op.in_c + c] *
                   w[(ky * op.kernel + kx) * op.in_c + c];
          }
        }
        out[(oy * op.out_w + ox) * op.in_c + c] = requantize(acc, m, out_zp);
      }
    }
  }
}

std::vector<std::int32_t> centered(const Int8Tensor& t) {
  std::vector<std::int32_t> out(t.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.data[i] - t.qp.zero_point;
  return out;
}

void check_order(const Graph& g, const std::vector<std::size_t>& order) {
  std::vector<char> done(g.nodes.size(), 0);
  if (order.size() != g.nodes.size()) {
    fail(ErrorCode::kInvalidArgument, "execution order must list every node once");
  }
  for (std::size_t id : order) {
    if (id >= g.nodes.size() || done[id]) {
      fail(ErrorCode::kInvalidArgument, "execution order must list every node once");
    }
    for (std::size_t p : g.nodes[id].inputs) {
      if (!done[p]) {
        fail(ErrorCode::kInvalidArgument, "execution order runs '" + g.nodes[id].name +
                                              "' before its input '" + g.nodes[p].name + "'");
      }
    }
    done[id] = 1;
  }
}

}  // namespace

Int8Result infer_int8(const QuantizedModel& model, std::span<const Int8Tensor> inputs,
                      const std::vector<std::size_t>& order) {
  const Graph& g = model.graph;
  const std::size_t n = g.nodes.size();
  const auto input_ids = g.input_nodes();
  if (inputs.size() != input_ids.size()) {
    fail(ErrorCode::kShapeMismatch, "graph '" + g.name + "' expects " +
                                        std::to_string(input_ids.size()) + " inputs, got " +
                                        std::to_string(inputs.size()));
  }
  std::vector<std::size_t> schedule = order;
  if (schedule.empty()) {
    for (std::size_t i = 0; i < n; ++i) schedule.push_back(i);
  } else {
    check_order(g, schedule);
  }

  std::vector<Int8Tensor> acts(n);
  for (std::size_t id : schedule) {
    const Node& node = g.nodes[id];
    const QuantParams& qp = model.activations[id];
    Int8Tensor& out = acts[id];
    if (node.spec.kind == LayerKind::kInput) {
      const Int8Tensor& in = inputs[id];
      if (!(in.shape == model.shapes[id]) || in.data.size() != in.shape.element_count()) {
        fail(ErrorCode::kShapeMismatch, "input '" + node.name + "' expects " +
                                            model.shapes[id].to_string() + ", got " +
                                            in.shape.to_string());
      }
      if (in.qp.scale != qp.scale || in.qp.zero_point != qp.zero_point) {
        fail(ErrorCode::kInvalidArgument,
             "input '" + node.name + "' was quantized with different parameters");
      }
      out = in;
      continue;
    }
    if (node.spec.kind == LayerKind::kSoftmax) continue;
    const Int8Tensor& in = acts[node.inputs[0]];
    out.shape = model.shapes[id];
    out.qp = qp;
    out.data.assign(out.shape.element_count(), 0);
    const auto& p = model.params[id];
    switch (node.spec.kind) {
      case LayerKind::kConv2D: {
        const auto op = kernels::window_op(in.shape, out.shape, node.spec.kernel,
                                           node.spec.stride, node.spec.padding);
        conv_int8(centered(in), p[0].q8, p[1].q32, op, model.multipliers[id][0],
                  qp.zero_point, out.data);
        break;
      }
      case LayerKind::kSeparableConv2D: {
        auto op = kernels::window_op(in.shape, out.shape, node.spec.kernel, node.spec.stride,
                                     node.spec.padding);
        const QuantParams& mid_qp = *model.depthwise[id];
        Int8Tensor mid;
        mid.shape = TensorShape{op.out_h, op.out_w, op.in_c};
        mid.qp = mid_qp;
        mid.data.assign(mid.shape.element_count(), 0);
        depthwise_int8(centered(in), p[0].q8, p[1].q32, op, model.multipliers[id][0],
                       mid_qp.zero_point, mid.data);
        kernels::WindowOp pw;
        pw.in_h = pw.out_h = op.out_h;
        pw.in_w = pw.out_w = op.out_w;
        pw.in_c = op.in_c;
        pw.out_c = out.shape.channels();
        conv_int8(centered(mid), p[2].q8, p[3].q32, pw, model.multipliers[id][1],
                  qp.zero_point, out.data);
        break;
      }
      case LayerKind::kDense: {
        kernels::WindowOp op;
        op.in_c = in.shape.channels();
        op.out_c = out.shape.channels();
        op.in_h = op.in_w = op.out_h = op.out_w = 1;
        conv_int8(centered(in), p[0].q8, p[1].q32, op, model.multipliers[id][0],
                  qp.zero_point, out.data);
        break;
      }
      case LayerKind::kMaxPool2D: {
        const auto op = kernels::window_op(in.shape, out.shape, node.spec.kernel,
                                           node.spec.stride, node.spec.padding);
        for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
          for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
            for (std::int64_t c = 0; c < op.in_c; ++c) {
              std::int32_t best = kInt8Min - 1;
              for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
                const std::int64_t iy = oy * op.stride + ky - op.pad_top;
                if (iy < 0 || iy >= op.in_h) continue;
                for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
                  const std::int64_t ix = ox * op.stride + kx - op.pad_left;
                  if (ix < 0 || ix >= op.in_w) continue;
                  best = std::max<std::int32_t>(best, in.data[(iy * op.in_w + ix) * op.in_c + c]);
                }
              }
              out.data[(oy * op.out_w + ox) * op.in_c + c] = static_cast<std::int8_t>(best);
            }
          }
        }
        break;
      }
      case LayerKind::kAvgPool2D: {
        const auto op = kernels::window_op(in.shape, out.shape, node.spec.kernel,
                                           node.spec.stride, node.spec.padding);
        const std::int32_t zp = in.qp.zero_point;
        for (std::int64_t oy = 0; oy < op.out_h; ++oy) {
          for (std::int64_t ox = 0; ox < op.out_w; ++ox) {
            for (std::int64_t c = 0; c < op.in_c; ++c) {
              std::int64_t sum = 0, count = 0;
              for (std::int64_t ky = 0; ky < op.kernel; ++ky) {
                const std::int64_t iy = oy * op.stride + ky - op.pad_top;
                if (iy < 0 || iy >= op.in_h) continue;
                for (std::int64_t kx = 0; kx < op.kernel; ++kx) {
                  const std::int64_t ix = ox * op.stride + kx - op.pad_left;
                  if (ix < 0 || ix >= op.in_w) continue;
                  sum += in.data[(iy * op.in_w + ix) * op.in_c + c] - zp;
                  ++count;
                }
              }
              const std::int64_t mag = ((sum < 0 ? -sum : sum) * 2 + count) / (2 * count);
              std::int64_t v = (sum < 0 ? -mag : mag) + zp;
              v = std::clamp<std::int64_t>(v, kInt8Min, kInt8Max);
              out.data[(oy * op.out_w + ox) * op.in_c + c] = static_cast<std::int8_t>(v);
            }
          }
        }
        break;
      }
      case LayerKind::kFlatten:
        out.data = in.data;
        break;
      case LayerKind::kReLU: {
        const auto zp = static_cast<std::int8_t>(in.qp.zero_point);
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::max(in.data[i], zp);
        break;
      }
      case LayerKind::kConcat: {
        std::vector<Int8Tensor> parts;
        for (std::size_t pred : node.inputs) parts.push_back(acts[pred]);
        out = concat_int8(parts, qp);
        break;
      }
      case LayerKind::kInput:
      case LayerKind::kSoftmax:
        break;
    }
  }

  const std::size_t logits_id = g.nodes[g.output()].inputs[0];
  const Int8Tensor& logits = acts[logits_id];
  Int8Result r;
  r.logits = logits.data;
  r.real_logits = dequantize_tensor(logits.data, logits.qp);
  r.probabilities.resize(r.real_logits.size());
  softmax<float>(r.real_logits, r.probabilities);
  r.top1 = argmax<float>(r.probabilities);
  return r;
}

Int8Result infer_int8(const QuantizedModel& model,
                      const std::map<std::string, Int8Tensor>& inputs) {
  std::vector<Int8Tensor> ordered;
  for (const auto& name : model.graph.input_names()) {
    const auto it = inputs.find(name);
    if (it == inputs.end()) {
      fail(ErrorCode::kInvalidArgument, "missing input for modality '" + name + "'");
    }
    ordered.push_back(it->second);
  }
  return infer_int8(model, ordered);
}

std::vector<Int8Tensor> quantize_sample(const QuantizedModel& model, const Dataset& data,
                                        std::size_t sample) {
  std::vector<Int8Tensor> out;
  for (std::size_t id : model.graph.input_nodes()) {
    const std::string& name = model.graph.nodes[id].name;
    const auto m = data.modality_index(name);
    if (!m) fail(ErrorCode::kInvalidArgument, "dataset has no modality '" + name + "'");
    if (!(data.modalities[*m].shape == model.shapes[id])) {
      fail(ErrorCode::kShapeMismatch, "modality '" + name + "' has shape " +
                                          data.modalities[*m].shape.to_string() +
                                          " but the model expects " +
                                          model.shapes[id].to_string());
    }
    out.push_back(quantize_input(data.sample(*m, sample), model.shapes[id],
                                 model.activations[id]));
  }
  return out;
}

Int8Evaluation evaluate_int8(const QuantizedModel& model, const Dataset& data, Split split,
                             std::size_t threads) {
  const auto& samples = data.split(split);
  if (samples.empty()) {
    fail(ErrorCode::kInvalidArgument,
         std::string("cannot evaluate on empty split '") + split_name(split) + "'");
  }
  if (model.graph.num_classes != data.num_classes) {
    fail(ErrorCode::kInvalidArgument, "model and dataset disagree on the class count");
  }
  Int8Evaluation ev;
  ev.total = samples.size();
  ev.predictions.resize(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    ev.predictions[i] =
        static_cast<int>(infer_int8(model, quantize_sample(model, data, samples[i])).top1);
  });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    correct += ev.predictions[i] == data.labels[samples[i]];
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return ev;
}

}  // namespace tinyfuse
