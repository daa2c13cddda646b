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

#include "tinyfuse/graph.hpp"

#include <algorithm>
#include <set>

#include "tinyfuse/error.hpp"

namespace tinyfuse {
namespace {

struct KindName {
  LayerKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::kInput, "input"},
    {LayerKind::kConv2D, "conv2d"},
    {LayerKind::kSeparableConv2D, "separable_conv2d"},
    {LayerKind::kDense, "dense"},
    {LayerKind::kMaxPool2D, "max_pool2d"},
    {LayerKind::kAvgPool2D, "avg_pool2d"},
    {LayerKind::kFlatten, "flatten"},
    {LayerKind::kConcat, "concat"},
    {LayerKind::kReLU, "relu"},
    {LayerKind::kSoftmax, "softmax"},
};

[[noreturn]] void invalid(const std::string& message) {
  fail(ErrorCode::kInvalidGraph, "invalid graph: " + message);
}

[[noreturn]] void shape_error(const Node& node, const std::string& message) {
  fail(ErrorCode::kShapeMismatch,
       "shape mismatch at node '" + node.name + "': " + message);
}

std::string shape_list(const ShapeMap& shapes,
                       const std::vector<std::size_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += shapes[ids[i]].to_string();
  }
  return out;
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
  for (const auto& entry : kKindNames) {
    if (entry.kind == kind) return entry.name;
  }
  return "unknown";
}

std::optional<LayerKind> parse_layer_kind(const std::string& name) {
  for (const auto& entry : kKindNames) {
    if (name == entry.name) return entry.kind;
  }
  return std::nullopt;
}

const char* padding_name(Padding padding) {
  return padding == Padding::kSame ? "same" : "valid";
}

const char* precision_name(Precision precision) {
  return precision == Precision::kFloat32 ? "float32" : "int8";
}

bool has_parameters(LayerKind kind) {
  return kind == LayerKind::kConv2D || kind == LayerKind::kSeparableConv2D ||
         kind == LayerKind::kDense;
}

bool is_convolution(LayerKind kind) {
  return kind == LayerKind::kConv2D || kind == LayerKind::kSeparableConv2D;
}

std::vector<std::size_t> Graph::input_nodes() const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].spec.kind == LayerKind::kInput) ids.push_back(i);
  }
  return ids;
}

std::vector<std::string> Graph::input_names() const {
  std::vector<std::string> names;
  for (std::size_t id : input_nodes()) names.push_back(nodes[id].name);
  return names;
}

std::optional<std::size_t> Graph::find(const std::string& node_name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == node_name) return i;
  }
  return std::nullopt;
}

std::size_t Graph::at(const std::string& node_name) const {
  auto id = find(node_name);
  if (!id) {
    fail(ErrorCode::kInvalidArgument,
         "graph '" + name + "' has no node named '" + node_name + "'");
  }
  return *id;
}

std::vector<std::vector<std::size_t>> Graph::consumers() const {
  std::vector<std::vector<std::size_t>> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t p : nodes[i].inputs) out[p].push_back(i);
  }
  return out;
}

void validate_graph(const Graph& graph) {
  if (graph.nodes.empty()) invalid("graph has no nodes");
  if (graph.num_classes < 2) {
    invalid("class count must be at least 2, got " +
            std::to_string(graph.num_classes));
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const Node& node = graph.nodes[i];
    const LayerSpec& s = node.spec;
    if (node.name.empty()) invalid("node " + std::to_string(i) + " is unnamed");
    if (!names.insert(node.name).second) {
      invalid("duplicate node name '" + node.name + "'");
    }
    for (std::size_t p : node.inputs) {
      if (p >= i) {
        invalid("node '" + node.name +
                "' references a node that is not earlier in execution order");
      }
    }
    const std::size_t arity = node.inputs.size();
    switch (s.kind) {
      case LayerKind::kInput:
        if (arity != 0) invalid("input '" + node.name + "' has predecessors");
        for (std::int64_t d : s.input_shape.dims()) {
          if (d < 1) invalid("input '" + node.name + "' has a non-positive extent");
        }
        break;
      case LayerKind::kConcat:
        if (arity < 2) invalid("concat '" + node.name + "' needs >= 2 inputs");
        break;
      default:
        if (arity != 1) {
          invalid("node '" + node.name + "' (" + layer_kind_name(s.kind) +
                  ") needs exactly one input");
        }
    }
    if (is_convolution(s.kind) &&
        (s.kernel < 1 || s.stride < 1 || s.filters < 1)) {
      invalid("convolution '" + node.name +
              "' needs kernel >= 1, stride >= 1, filters >= 1");
    }
    if ((s.kind == LayerKind::kMaxPool2D || s.kind == LayerKind::kAvgPool2D) &&
        (s.kernel < 1 || s.stride < 1)) {
      invalid("pooling '" + node.name + "' needs kernel >= 1, stride >= 1");
    }
    if (s.kind == LayerKind::kDense && s.units < 1) {
      invalid("dense '" + node.name + "' needs units >= 1");
    }
    if (s.kind == LayerKind::kSoftmax && i != graph.output()) {
      invalid("softmax '" + node.name + "' must be the output node");
    }
  }

  const auto inputs = graph.input_nodes();
  if (inputs.empty()) invalid("graph has no input nodes");
  if (inputs.back() != inputs.size() - 1) {
    invalid("input nodes must occupy the leading node positions");
  }

  const Node& out = graph.nodes[graph.output()];
  if (out.spec.kind != LayerKind::kSoftmax) {
    invalid("output node '" + out.name + "' is not a softmax");
  }
  const Node& head = graph.nodes[out.inputs[0]];
  if (head.spec.kind != LayerKind::kDense) {
    invalid("softmax '" + out.name + "' must be fed by a dense layer");
  }
  if (head.spec.units != graph.num_classes) {
    invalid("classifier '" + head.name + "' has " +
            std::to_string(head.spec.units) + " units but the graph declares " +
            std::to_string(graph.num_classes) + " classes");
  }

  // Every node must contribute to the output.
  std::vector<bool> live(graph.nodes.size(), false);
  live[graph.output()] = true;
  for (std::size_t i = graph.nodes.size(); i-- > 0;) {
    if (!live[i]) {
      invalid("node '" + graph.nodes[i].name +
              "' does not contribute to the output");
    }
    for (std::size_t p : graph.nodes[i].inputs) live[p] = true;
  }

  // Exactly one fusion point on every input-to-output path.
  if (inputs.size() > 1) {
    std::vector<int> lo(graph.nodes.size(), 0), hi(graph.nodes.size(), 0);
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
      const Node& node = graph.nodes[i];
      if (node.spec.kind == LayerKind::kInput) continue;
      int mn = 1 << 20, mx = 0;
      for (std::size_t p : node.inputs) {
        mn = std::min(mn, lo[p]);
        mx = std::max(mx, hi[p]);
      }
      const int here = node.spec.kind == LayerKind::kConcat ? 1 : 0;
      lo[i] = mn + here;
      hi[i] = mx + here;
    }
    if (lo[graph.output()] != 1 || hi[graph.output()] != 1) {
      invalid("multimodal graph '" + graph.name +
              "' must have exactly one concat on every input-to-output path");
    }
  }
}

WindowGeometry window_geometry(std::int64_t in, int kernel, int stride,
                               Padding padding) {
  WindowGeometry g;
  if (padding == Padding::kSame) {
    g.out = (in + stride - 1) / stride;
    const std::int64_t total =
        std::max<std::int64_t>((g.out - 1) * stride + kernel - in, 0);
    g.pad_before = total / 2;
  } else {
    g.out = in < kernel ? 0 : (in - kernel) / stride + 1;
  }
  return g;
}

ShapeMap infer_shapes(const Graph& graph,
                      const std::map<std::string, TensorShape>& input_shapes) {
  validate_graph(graph);
  ShapeMap shapes(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const Node& node = graph.nodes[i];
    const LayerSpec& s = node.spec;
    if (s.kind == LayerKind::kInput) {
      auto it = input_shapes.find(node.name);
      if (it == input_shapes.end()) {
        fail(ErrorCode::kInvalidArgument,
             "missing shape for modality '" + node.name + "'");
      }
      const TensorShape& shape = it->second;
      if (!shape.is_vector() && !shape.is_map()) {
        shape_error(node, "inputs must be vectors or HxWxC maps, got " +
                              shape.to_string());
      }
      shape.element_count();
      if (s.input_shape.rank() != 0 && !(s.input_shape == shape)) {
        shape_error(node, "declared " + s.input_shape.to_string() +
                              " but given " + shape.to_string());
      }
      shapes[i] = shape;
      continue;
    }
    const TensorShape& in = shapes[node.inputs[0]];
    switch (s.kind) {
      case LayerKind::kConv2D:
      case LayerKind::kSeparableConv2D:
      case LayerKind::kMaxPool2D:
      case LayerKind::kAvgPool2D: {
        if (!in.is_map()) {
          shape_error(node, "expects an HxWxC map, got " + in.to_string());
        }
        const auto gh = window_geometry(in.height(), s.kernel, s.stride, s.padding);
        const auto gw = window_geometry(in.width(), s.kernel, s.stride, s.padding);
        if (gh.out < 1 || gw.out < 1) {
          shape_error(node, "window " + std::to_string(s.kernel) +
                                " does not fit input " + in.to_string());
        }
        const std::int64_t c = is_convolution(s.kind) ? s.filters : in.channels();
        shapes[i] = TensorShape{gh.out, gw.out, c};
        break;
      }
      case LayerKind::kDense:
        if (!in.is_vector()) {
          shape_error(node, "dense expects a vector input, got " +
                                in.to_string() + " (insert a flatten)");
        }
        shapes[i] = TensorShape{s.units};
        break;
      case LayerKind::kFlatten:
        shapes[i] = TensorShape{static_cast<std::int64_t>(in.element_count())};
        break;
      case LayerKind::kConcat: {
        const bool all_vectors = std::all_of(
            node.inputs.begin(), node.inputs.end(),
            [&](std::size_t p) { return shapes[p].is_vector(); });
        const bool all_maps = std::all_of(
            node.inputs.begin(), node.inputs.end(), [&](std::size_t p) {
              return shapes[p].is_map() && shapes[p].height() == in.height() &&
                     shapes[p].width() == in.width();
            });
        if (!all_vectors && !all_maps) {
          shape_error(node, "incompatible concat inputs " +
                                shape_list(shapes, node.inputs));
        }
        std::int64_t sum = 0;
        for (std::size_t p : node.inputs) sum += shapes[p].channels();
        shapes[i] = all_vectors ? TensorShape{sum}
                                : TensorShape{in.height(), in.width(), sum};
        break;
      }
      case LayerKind::kReLU:
        shapes[i] = in;
        break;
      case LayerKind::kSoftmax:
        if (!in.is_vector()) {
          shape_error(node, "softmax expects a vector, got " + in.to_string());
        }
        shapes[i] = in;
        break;
      case LayerKind::kInput:
        break;
    }
  }
  return shapes;
}

ShapeMap infer_shapes(const Graph& graph) {
  std::map<std::string, TensorShape> declared;
  for (std::size_t id : graph.input_nodes()) {
    declared[graph.nodes[id].name] = graph.nodes[id].spec.input_shape;
  }
  return infer_shapes(graph, declared);
}

std::vector<ParamTensorInfo> param_tensors(const Graph& graph,
                                           const ShapeMap& shapes,
                                           std::size_t node) {
  const Node& n = graph.nodes[node];
  const LayerSpec& s = n.spec;
  if (!has_parameters(s.kind)) return {};
  const TensorShape& in = shapes[n.inputs[0]];
  const std::int64_t k = s.kernel;
  switch (s.kind) {
    case LayerKind::kConv2D:
      return {{"weight", TensorShape{k, k, in.channels(), s.filters}, false},
              {"bias", TensorShape{s.filters}, true}};
    case LayerKind::kSeparableConv2D:
      return {{"depthwise", TensorShape{k, k, in.channels()}, false},
              {"depthwise_bias", TensorShape{in.channels()}, true},
              {"pointwise", TensorShape{in.channels(), s.filters}, false},
              {"pointwise_bias", TensorShape{s.filters}, true}};
    case LayerKind::kDense:
      return {{"weight", TensorShape{in[0], s.units}, false},
              {"bias", TensorShape{s.units}, true}};
    default:
      return {};
  }
}

NodeCounts param_count(const Graph& graph, const ShapeMap& shapes) {
  NodeCounts counts;
  counts.per_node.assign(graph.nodes.size(), 0);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const Node& n = graph.nodes[i];
    const LayerSpec& s = n.spec;
    if (!has_parameters(s.kind)) continue;
    const std::uint64_t cin = shapes[n.inputs[0]].channels();
    const std::uint64_t k2 = static_cast<std::uint64_t>(s.kernel) * s.kernel;
    std::uint64_t c = 0;
    switch (s.kind) {
      case LayerKind::kConv2D:
        c = k2 * cin * s.filters + s.filters;
        break;
      case LayerKind::kSeparableConv2D:
        c = k2 * cin + cin + cin * s.filters + s.filters;
        break;
      case LayerKind::kDense:
        c = cin * s.units + s.units;
        break;
      default:
        break;
    }
    counts.per_node[i] = c;
    counts.total += c;
  }
  return counts;
}

NodeCounts op_count(const Graph& graph, const ShapeMap& shapes) {
  NodeCounts counts;
  counts.per_node.assign(graph.nodes.size(), 0);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const Node& n = graph.nodes[i];
    const LayerSpec& s = n.spec;
    if (!has_parameters(s.kind)) continue;
    const TensorShape& in = shapes[n.inputs[0]];
    const TensorShape& out = shapes[i];
    const std::uint64_t k2 = static_cast<std::uint64_t>(s.kernel) * s.kernel;
    std::uint64_t ops = 0;
    switch (s.kind) {
      case LayerKind::kConv2D: {
        const std::uint64_t pixels = out.height() * out.width();
        ops = 2 * pixels * s.filters * k2 * in.channels();
        break;
      }
      case LayerKind::kSeparableConv2D: {
        const std::uint64_t pixels = out.height() * out.width();
        ops = 2 * pixels * in.channels() * k2 +
              2 * pixels * in.channels() * s.filters;
        break;
      }
      case LayerKind::kDense:
        ops = 2 * static_cast<std::uint64_t>(in[0]) * s.units;
        break;
      default:
        break;
    }
    counts.per_node[i] = ops;
    counts.total += ops;
  }
  return counts;
}

SizeBreakdown model_size(const Graph& graph, const ShapeMap& shapes,
                         Precision precision) {
  SizeBreakdown size;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    for (const auto& t : param_tensors(graph, shapes, i)) {
      (t.is_bias ? size.bias_count : size.weight_count) += t.shape.element_count();
      ++size.tensor_count;
    }
  }
  if (precision == Precision::kFloat32) {
    size.bytes = 4 * (size.weight_count + size.bias_count);
  } else {
    size.bytes = size.weight_count + 4 * size.bias_count +
                 kQuantParamBytesPerTensor * size.tensor_count;
  }
  return size;
}

std::uint64_t model_size_bytes(const Graph& graph, const ShapeMap& shapes,
                               Precision precision) {
  return model_size(graph, shapes, precision).bytes;
}

Graph restrict_to_modalities(const Graph& graph,
                             const std::vector<std::string>& modalities) {
  validate_graph(graph);
  for (const auto& m : modalities) {
    auto id = graph.find(m);
    if (!id || graph.nodes[*id].spec.kind != LayerKind::kInput) {
      fail(ErrorCode::kInvalidArgument,
           "graph '" + graph.name + "' has no modality '" + m + "'");
    }
  }
  const std::size_t n = graph.nodes.size();
  std::vector<bool> keep(n, false);
  // Node index each original node resolves to after concat elision.
  std::vector<std::size_t> alias(n);
  for (std::size_t i = 0; i < n; ++i) {
    alias[i] = i;
    const Node& node = graph.nodes[i];
    if (node.spec.kind == LayerKind::kInput) {
      keep[i] = std::find(modalities.begin(), modalities.end(), node.name) !=
                modalities.end();
      continue;
    }
    keep[i] = std::any_of(node.inputs.begin(), node.inputs.end(),
                          [&](std::size_t p) { return keep[p]; });
  }

  Graph out;
  out.name = graph.name + "[" ;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    out.name += (i ? "," : "") + modalities[i];
  }
  out.name += "]";
  out.num_classes = graph.num_classes;
  std::vector<std::size_t> remap(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    const Node& node = graph.nodes[i];
    std::vector<std::size_t> preds;
    for (std::size_t p : node.inputs) {
      if (keep[p]) preds.push_back(remap[alias[p]]);
    }
    if (node.spec.kind == LayerKind::kConcat && preds.size() == 1) {
      std::size_t only = 0;
      for (std::size_t p : node.inputs) {
        if (keep[p]) only = alias[p];
      }
      alias[i] = only;
      continue;
    }
    remap[i] = out.nodes.size();
    out.nodes.push_back(Node{node.name, node.spec, std::move(preds)});
  }
  validate_graph(out);
  return out;
}

GraphBuilder::GraphBuilder(std::string name, int num_classes) {
  graph_.name = std::move(name);
  graph_.num_classes = num_classes;
}

std::size_t GraphBuilder::add(const std::string& name, LayerSpec spec,
                              std::vector<std::size_t> inputs) {
  graph_.nodes.push_back(Node{name, std::move(spec), std::move(inputs)});
  return graph_.nodes.size() - 1;
}

std::size_t GraphBuilder::input(const std::string& name, TensorShape shape) {
  LayerSpec s;
  s.kind = LayerKind::kInput;
  s.input_shape = std::move(shape);
  return add(name, s, {});
}

std::size_t GraphBuilder::conv2d(const std::string& name, std::size_t from,
                                 int filters, int kernel, int stride,
                                 Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::kConv2D;
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return add(name, s, {from});
}

std::size_t GraphBuilder::separable_conv2d(const std::string& name,
                                           std::size_t from, int filters,
                                           int kernel, int stride,
                                           Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::kSeparableConv2D;
  s.filters = filters;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return add(name, s, {from});
}

std::size_t GraphBuilder::dense(const std::string& name, std::size_t from,
                                int units) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.units = units;
  return add(name, s, {from});
}

std::size_t GraphBuilder::max_pool(const std::string& name, std::size_t from,
                                   int kernel, int stride, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool2D;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return add(name, s, {from});
}

std::size_t GraphBuilder::avg_pool(const std::string& name, std::size_t from,
                                   int kernel, int stride, Padding padding) {
  LayerSpec s;
  s.kind = LayerKind::kAvgPool2D;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return add(name, s, {from});
}

std::size_t GraphBuilder::flatten(const std::string& name, std::size_t from) {
  LayerSpec s;
  s.kind = LayerKind::kFlatten;
  return add(name, s, {from});
}

std::size_t GraphBuilder::concat(const std::string& name,
                                 std::vector<std::size_t> inputs) {
  LayerSpec s;
  s.kind = LayerKind::kConcat;
  return add(name, s, std::move(inputs));
}

std::size_t GraphBuilder::relu(const std::string& name, std::size_t from) {
  LayerSpec s;
  s.kind = LayerKind::kReLU;
  return add(name, s, {from});
}

std::size_t GraphBuilder::softmax(const std::string& name, std::size_t from) {
  LayerSpec s;
  s.kind = LayerKind::kSoftmax;
  return add(name, s, {from});
}

Graph GraphBuilder::build() {
  validate_graph(graph_);
  return build_unchecked();
}

Graph GraphBuilder::build_unchecked() {
  Graph out = std::move(graph_);
  graph_ = Graph{};
  graph_.name = out.name;
  graph_.num_classes = out.num_classes;
  return out;
}

}  // namespace tinyfuse
