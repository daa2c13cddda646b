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

#ifndef TINYFUSE_EXECUTOR_HPP_
#define TINYFUSE_EXECUTOR_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tinyfuse/error.hpp"
#include "tinyfuse/kernels.hpp"
#include "tinyfuse/model.hpp"
#include "tinyfuse/softmax.hpp"

namespace tinyfuse {

// Forward cache: one output per node plus the depthwise intermediate of each
// SeparableConv2D node (empty elsewhere).
template <typename T>
struct Activations {
  std::vector<Tensor<T>> outputs;
  std::vector<Tensor<T>> depthwise;

  std::span<const T> probabilities() const { return outputs.back().span(); }
};

// Index of the classifier (the dense node feeding the softmax).
inline std::size_t logits_node(const Graph& graph) {
  return graph.nodes[graph.output()].inputs[0];
}

namespace detail {

inline kernels::WindowOp node_window(const Graph& graph, const ShapeMap& shapes,
                                     std::size_t id) {
  const Node& node = graph.nodes[id];
  return kernels::window_op(shapes[node.inputs[0]], shapes[id],
                            node.spec.kernel, node.spec.stride,
                            node.spec.padding);
}

inline kernels::WindowOp pointwise_window(const TensorShape& out, std::int64_t cin) {
  kernels::WindowOp op;
  op.in_h = op.out_h = out.height();
  op.in_w = op.out_w = out.width();
  op.in_c = cin;
  op.out_c = out.channels();
  return op;
}

}  // namespace detail

// inputs are given in graph input order.
template <typename T>
Activations<T> forward(const BasicModel<T>& model,
                       std::span<const Tensor<T>> inputs) {
  const Graph& g = model.graph;
  const ShapeMap& shapes = model.shapes;
  const auto input_ids = g.input_nodes();
  if (inputs.size() != input_ids.size()) {
    fail(ErrorCode::kShapeMismatch,
         "graph '" + g.name + "' expects " + std::to_string(input_ids.size()) +
             " inputs, got " + std::to_string(inputs.size()));
  }
  Activations<T> acts;
  acts.outputs.resize(g.nodes.size());
  acts.depthwise.resize(g.nodes.size());
  for (std::size_t id = 0; id < g.nodes.size(); ++id) {
    const Node& node = g.nodes[id];
    Tensor<T>& out = acts.outputs[id];
    if (node.spec.kind == LayerKind::kInput) {
      const Tensor<T>& in = inputs[id];
      if (!(in.shape == shapes[id]) || in.data.size() != shapes[id].element_count()) {
        fail(ErrorCode::kShapeMismatch, "input '" + node.name + "' expects " +
                                            shapes[id].to_string() + ", got " +
                                            in.shape.to_string());
      }
      out = in;
    } else {
      out = Tensor<T>(shapes[id]);
      const Tensor<T>& in = acts.outputs[node.inputs[0]];
      const auto& p = model.params[id];
      switch (node.spec.kind) {
        case LayerKind::kConv2D:
          kernels::conv2d_forward<T>(in.span(), p[0].span(), p[1].span(),
                                     out.span(), detail::node_window(g, shapes, id));
          break;
        case LayerKind::kSeparableConv2D: {
          const auto op = detail::node_window(g, shapes, id);
          Tensor<T>& mid = acts.depthwise[id];
          mid = Tensor<T>(TensorShape{op.out_h, op.out_w, op.in_c});
          kernels::depthwise_forward<T>(in.span(), p[0].span(), p[1].span(),
                                        mid.span(), op);
          kernels::conv2d_forward<T>(mid.span(), p[2].span(), p[3].span(),
                                     out.span(),
                                     detail::pointwise_window(shapes[id], op.in_c));
          break;
        }
        case LayerKind::kDense:
          kernels::dense_forward<T>(in.span(), p[0].span(), p[1].span(), out.span());
          break;
        case LayerKind::kMaxPool2D:
          kernels::max_pool_forward<T>(in.span(), out.span(),
                                       detail::node_window(g, shapes, id));
          break;
        case LayerKind::kAvgPool2D:
          kernels::avg_pool_forward<T>(in.span(), out.span(),
                                       detail::node_window(g, shapes, id));
          break;
        case LayerKind::kFlatten:
          out.data = in.data;
          break;
        case LayerKind::kConcat: {
          const std::size_t rows = shapes[id].is_vector()
                                       ? 1
                                       : shapes[id].height() * shapes[id].width();
          const std::size_t width = shapes[id].channels();
          std::size_t offset = 0;
          for (std::size_t pred : node.inputs) {
            const Tensor<T>& src = acts.outputs[pred];
            const std::size_t c = shapes[pred].channels();
            for (std::size_t r = 0; r < rows; ++r) {
              std::copy_n(src.data.data() + r * c, c,
                          out.data.data() + r * width + offset);
            }
            offset += c;
          }
          break;
        }
        case LayerKind::kReLU:
          for (std::size_t i = 0; i < in.size(); ++i) {
            out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
          }
          break;
        case LayerKind::kSoftmax:
          softmax<T>(in.span(), out.span());
          break;
        case LayerKind::kInput:
          break;
      }
    }
    if (!all_finite<T>(out.span())) {
      fail(ErrorCode::kNumeric,
           "non-finite activation at node '" + node.name + "'");
    }
  }
  return acts;
}

template <typename T>
Activations<T> forward(const BasicModel<T>& model,
                       const std::map<std::string, Tensor<T>>& inputs) {
  std::vector<Tensor<T>> ordered;
  for (const auto& name : model.graph.input_names()) {
    auto it = inputs.find(name);
    if (it == inputs.end()) {
      fail(ErrorCode::kInvalidArgument, "missing input for modality '" + name + "'");
    }
    ordered.push_back(it->second);
  }
  return forward<T>(model, std::span<const Tensor<T>>(ordered));
}

// Back-propagates seed_grad (gradient w.r.t. the output of seed_node) and
// accumulates parameter gradients into grads. When input_grads is non-null
// it receives the gradient w.r.t. each graph input, in input order.
template <typename T>
void backward(const BasicModel<T>& model, const Activations<T>& acts,
              std::size_t seed_node, std::span<const T> seed_grad,
              ParamSet<T>& grads, std::vector<Tensor<T>>* input_grads = nullptr) {
  const Graph& g = model.graph;
  const ShapeMap& shapes = model.shapes;
  if (acts.outputs.size() != g.nodes.size() ||
      acts.depthwise.size() != g.nodes.size()) {
    fail(ErrorCode::kInvalidArgument,
         "backward needs the forward cache of graph '" + g.name + "'");
  }
  if (seed_node >= g.nodes.size() ||
      seed_grad.size() != acts.outputs[seed_node].size()) {
    fail(ErrorCode::kShapeMismatch, "seed gradient does not match its node");
  }
  std::vector<std::vector<T>> node_grad(g.nodes.size());
  node_grad[seed_node].assign(seed_grad.begin(), seed_grad.end());
  // Gradients w.r.t. graph inputs are only materialized on request.
  auto grad_of = [&](std::size_t id) -> std::span<T> {
    if (!input_grads && g.nodes[id].spec.kind == LayerKind::kInput) return {};
    auto& buf = node_grad[id];
    if (buf.empty()) buf.assign(acts.outputs[id].size(), T(0));
    return buf;
  };

  for (std::size_t id = seed_node + 1; id-- > 0;) {
    const Node& node = g.nodes[id];
    if (node_grad[id].empty() || node.spec.kind == LayerKind::kInput) continue;
    std::span<const T> gout = node_grad[id];
    if (!all_finite<T>(gout)) {
      fail(ErrorCode::kNumeric, "non-finite gradient at node '" + node.name + "'");
    }
    const std::size_t src = node.inputs[0];
    const Tensor<T>& in = acts.outputs[src];
    const auto& p = model.params[id];
    auto& gp = grads[id];
    switch (node.spec.kind) {
      case LayerKind::kConv2D:
        kernels::conv2d_backward<T>(in.span(), p[0].span(), gout, grad_of(src),
                                    gp[0].span(), gp[1].span(),
                                    detail::node_window(g, shapes, id));
        break;
      case LayerKind::kSeparableConv2D: {
        const auto op = detail::node_window(g, shapes, id);
        const Tensor<T>& mid = acts.depthwise[id];
        std::vector<T> gmid(mid.size(), T(0));
        kernels::conv2d_backward<T>(mid.span(), p[2].span(), gout,
                                    std::span<T>(gmid), gp[2].span(), gp[3].span(),
                                    detail::pointwise_window(shapes[id], op.in_c));
        kernels::depthwise_backward<T>(in.span(), p[0].span(),
                                       std::span<const T>(gmid), grad_of(src),
                                       gp[0].span(), gp[1].span(), op);
        break;
      }
      case LayerKind::kDense:
        kernels::dense_backward<T>(in.span(), p[0].span(), gout, grad_of(src),
                                   gp[0].span(), gp[1].span());
        break;
      case LayerKind::kMaxPool2D:
        if (grad_of(src).empty()) break;
        kernels::max_pool_backward<T>(in.span(), acts.outputs[id].span(), gout,
                                      grad_of(src),
                                      detail::node_window(g, shapes, id));
        break;
      case LayerKind::kAvgPool2D:
        if (grad_of(src).empty()) break;
        kernels::avg_pool_backward<T>(gout, grad_of(src),
                                      detail::node_window(g, shapes, id));
        break;
      case LayerKind::kFlatten: {
        auto gi = grad_of(src);
        if (gi.empty()) break;
        for (std::size_t i = 0; i < gout.size(); ++i) gi[i] += gout[i];
        break;
      }
      case LayerKind::kConcat: {
        const std::size_t rows =
            shapes[id].is_vector() ? 1 : shapes[id].height() * shapes[id].width();
        const std::size_t width = shapes[id].channels();
        std::size_t offset = 0;
        for (std::size_t pred : node.inputs) {
          const std::size_t c = shapes[pred].channels();
          auto gi = grad_of(pred);
          if (gi.empty()) {
            offset += c;
            continue;
          }
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t k = 0; k < c; ++k) {
              gi[r * c + k] += gout[r * width + offset + k];
            }
          }
          offset += c;
        }
        break;
      }
      case LayerKind::kReLU: {
        auto gi = grad_of(src);
        if (gi.empty()) break;
        const auto& x = in.data;
        for (std::size_t i = 0; i < gout.size(); ++i) {
          if (x[i] > T(0)) gi[i] += gout[i];
        }
        break;
      }
      case LayerKind::kSoftmax: {
        const auto& prob = acts.outputs[id].data;
        T dot = 0;
        for (std::size_t i = 0; i < gout.size(); ++i) dot += gout[i] * prob[i];
        auto gi = grad_of(src);
        if (gi.empty()) break;
        for (std::size_t i = 0; i < gout.size(); ++i) {
          gi[i] += prob[i] * (gout[i] - dot);
        }
        break;
      }
      case LayerKind::kInput:
        break;
    }
  }

  if (input_grads) {
    input_grads->clear();
    for (std::size_t id : g.input_nodes()) {
      Tensor<T> t(shapes[id]);
      if (!node_grad[id].empty()) t.data = node_grad[id];
      input_grads->push_back(std::move(t));
    }
  }
}

}  // namespace tinyfuse

#endif  // TINYFUSE_EXECUTOR_HPP_
