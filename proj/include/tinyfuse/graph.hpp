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

#ifndef TINYFUSE_GRAPH_HPP_
#define TINYFUSE_GRAPH_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tinyfuse/shape.hpp"

namespace tinyfuse {

enum class LayerKind {
  kInput,
  kConv2D,
  kSeparableConv2D,
  kDense,
  kMaxPool2D,
  kAvgPool2D,
  kFlatten,
  kConcat,
  kReLU,
  kSoftmax,
};

enum class Padding { kSame, kValid };

enum class Precision { kFloat32, kInt8 };

const char* layer_kind_name(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(const std::string& name);
const char* padding_name(Padding padding);
const char* precision_name(Precision precision);

struct LayerSpec {
  LayerKind kind = LayerKind::kInput;
  int kernel = 0;  // conv kernel or pooling window, square
  int stride = 1;
  Padding padding = Padding::kValid;
  int filters = 0;  // Conv2D / SeparableConv2D output channels
  int units = 0;    // Dense output width
  TensorShape input_shape;  // kInput only

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

bool has_parameters(LayerKind kind);
bool is_convolution(LayerKind kind);

struct Node {
  std::string name;
  LayerSpec spec;
  std::vector<std::size_t> inputs;  // indices of predecessor nodes

  friend bool operator==(const Node&, const Node&) = default;
};

// Multimodal network description. Nodes are stored in execution order:
// every predecessor index is smaller than the node's own index, so the
// stored order is a topological order and the last node is the output.
struct Graph {
  std::string name;
  int num_classes = 0;
  std::vector<Node> nodes;

  std::size_t output() const { return nodes.size() - 1; }
  std::vector<std::size_t> input_nodes() const;
  std::vector<std::string> input_names() const;
  std::optional<std::size_t> find(const std::string& node_name) const;
  std::size_t at(const std::string& node_name) const;  // throws if absent
  std::vector<std::vector<std::size_t>> consumers() const;

  friend bool operator==(const Graph&, const Graph&) = default;
};

// Throws Error(kInvalidGraph) describing the first violated invariant.
void validate_graph(const Graph& graph);

using ShapeMap = std::vector<TensorShape>;  // indexed by node

ShapeMap infer_shapes(const Graph& graph,
                      const std::map<std::string, TensorShape>& input_shapes);
// Uses the shapes declared on the input nodes.
ShapeMap infer_shapes(const Graph& graph);

// Sliding-window geometry along one spatial axis.
struct WindowGeometry {
  std::int64_t out = 0;
  std::int64_t pad_before = 0;
};
WindowGeometry window_geometry(std::int64_t in, int kernel, int stride,
                               Padding padding);

struct NodeCounts {
  std::vector<std::uint64_t> per_node;
  std::uint64_t total = 0;
};

NodeCounts param_count(const Graph& graph, const ShapeMap& shapes);
// 1 MAC = 2 ops; bias adds, activations and pooling are not counted.
NodeCounts op_count(const Graph& graph, const ShapeMap& shapes);

// Named parameter tensors of one node, in storage order.
struct ParamTensorInfo {
  std::string name;
  TensorShape shape;
  bool is_bias = false;
};
std::vector<ParamTensorInfo> param_tensors(const Graph& graph,
                                           const ShapeMap& shapes,
                                           std::size_t node);

// Bytes of quantization metadata stored per parameter tensor in the int8
// accounting: one float32 scale plus one int32 zero point.
inline constexpr std::uint64_t kQuantParamBytesPerTensor = 8;

struct SizeBreakdown {
  std::uint64_t weight_count = 0;
  std::uint64_t bias_count = 0;
  std::uint64_t tensor_count = 0;
  std::uint64_t bytes = 0;
};

// float32: 4 bytes per parameter. int8: 1 byte per weight, 4 per bias, plus
// kQuantParamBytesPerTensor per parameter tensor.
SizeBreakdown model_size(const Graph& graph, const ShapeMap& shapes,
                         Precision precision);
std::uint64_t model_size_bytes(const Graph& graph, const ShapeMap& shapes,
                               Precision precision);

// Keeps only the named input modalities and the nodes that depend on them.
// A Concat left with a single predecessor is removed and its consumers are
// rewired to that predecessor.
Graph restrict_to_modalities(const Graph& graph,
                             const std::vector<std::string>& modalities);

// Incremental construction with validation at build().
class GraphBuilder {
 public:
  GraphBuilder(std::string name, int num_classes);

  std::size_t input(const std::string& name, TensorShape shape);
  std::size_t conv2d(const std::string& name, std::size_t from, int filters,
                     int kernel, int stride = 1,
                     Padding padding = Padding::kSame);
  std::size_t separable_conv2d(const std::string& name, std::size_t from,
                               int filters, int kernel, int stride = 1,
                               Padding padding = Padding::kSame);
  std::size_t dense(const std::string& name, std::size_t from, int units);
  std::size_t max_pool(const std::string& name, std::size_t from, int kernel,
                       int stride, Padding padding = Padding::kValid);
  std::size_t avg_pool(const std::string& name, std::size_t from, int kernel,
                       int stride, Padding padding = Padding::kValid);
  std::size_t flatten(const std::string& name, std::size_t from);
  std::size_t concat(const std::string& name,
                     std::vector<std::size_t> inputs);
  std::size_t relu(const std::string& name, std::size_t from);
  std::size_t softmax(const std::string& name, std::size_t from);

  std::size_t add(const std::string& name, LayerSpec spec,
                  std::vector<std::size_t> inputs);

  // Validates and returns the graph; the builder is left empty.
  Graph build();
  // Returns the graph without validation (tests of invalid graphs).
  Graph build_unchecked();

 private:
  Graph graph_;
};

}  // namespace tinyfuse

#endif  // TINYFUSE_GRAPH_HPP_
