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

#include "tinyfuse/graph_json.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "tinyfuse/error.hpp"

namespace tinyfuse {
namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    fail(ErrorCode::kFormat, where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat,
         where + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

}  // namespace

json graph_to_json(const Graph& graph) {
  json j;
  j["version"] = kGraphSchemaVersion;
  j["name"] = graph.name;
  j["num_classes"] = graph.num_classes;
  j["inputs"] = json::array();
  j["nodes"] = json::array();
  for (const Node& node : graph.nodes) {
    const LayerSpec& s = node.spec;
    if (s.kind == LayerKind::kInput) {
      json in;
      in["name"] = node.name;
      in["shape"] = s.input_shape.dims();
      j["inputs"].push_back(in);
      continue;
    }
    json n;
    n["name"] = node.name;
    n["op"] = layer_kind_name(s.kind);
    json preds = json::array();
    for (std::size_t p : node.inputs) preds.push_back(graph.nodes[p].name);
    n["inputs"] = preds;
    switch (s.kind) {
      case LayerKind::kConv2D:
      case LayerKind::kSeparableConv2D:
        n["filters"] = s.filters;
        [[fallthrough]];
      case LayerKind::kMaxPool2D:
      case LayerKind::kAvgPool2D:
        n["kernel"] = s.kernel;
        n["stride"] = s.stride;
        n["padding"] = padding_name(s.padding);
        break;
      case LayerKind::kDense:
        n["units"] = s.units;
        break;
      default:
        break;
    }
    j["nodes"].push_back(n);
  }
  return j;
}

Graph graph_from_json(const json& j) {
  const int version = field<int>(j, "version", "graph config");
  if (version != kGraphSchemaVersion) {
    fail(ErrorCode::kFormat, "graph config version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(kGraphSchemaVersion) + ")");
  }
  Graph g;
  g.name = field<std::string>(j, "name", "graph config");
  g.num_classes = field<int>(j, "num_classes", "graph config");
  std::map<std::string, std::size_t> ids;
  auto add = [&](Node node) {
    if (ids.count(node.name)) {
      fail(ErrorCode::kFormat, "graph config: duplicate node '" + node.name + "'");
    }
    ids[node.name] = g.nodes.size();
    g.nodes.push_back(std::move(node));
  };
  for (const json& in : field<json>(j, "inputs", "graph config")) {
    Node node;
    node.name = field<std::string>(in, "name", "graph input");
    node.spec.kind = LayerKind::kInput;
    node.spec.input_shape =
        TensorShape(field<std::vector<std::int64_t>>(in, "shape", node.name));
    add(std::move(node));
  }
  for (const json& n : field<json>(j, "nodes", "graph config")) {
    Node node;
    node.name = field<std::string>(n, "name", "graph node");
    const auto op = field<std::string>(n, "op", node.name);
    const auto kind = parse_layer_kind(op);
    if (!kind || *kind == LayerKind::kInput) {
      fail(ErrorCode::kFormat,
           "graph node '" + node.name + "': unknown op '" + op + "'");
    }
    LayerSpec& s = node.spec;
    s.kind = *kind;
    for (const auto& pred :
         field<std::vector<std::string>>(n, "inputs", node.name)) {
      auto it = ids.find(pred);
      if (it == ids.end()) {
        fail(ErrorCode::kFormat, "graph node '" + node.name +
                                     "' references unknown or later node '" +
                                     pred + "'");
      }
      node.inputs.push_back(it->second);
    }
    switch (s.kind) {
      case LayerKind::kConv2D:
      case LayerKind::kSeparableConv2D:
        s.filters = field<int>(n, "filters", node.name);
        [[fallthrough]];
      case LayerKind::kMaxPool2D:
      case LayerKind::kAvgPool2D: {
        s.kernel = field<int>(n, "kernel", node.name);
        s.stride = n.value("stride", 1);
        const auto pad = n.value("padding", std::string("valid"));
        if (pad != "same" && pad != "valid") {
          fail(ErrorCode::kFormat,
               "graph node '" + node.name + "': padding must be same or valid");
        }
        s.padding = pad == "same" ? Padding::kSame : Padding::kValid;
        break;
      }
      case LayerKind::kDense:
        s.units = field<int>(n, "units", node.name);
        break;
      default:
        break;
    }
    add(std::move(node));
  }
  validate_graph(g);
  return g;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kFormat,
         "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

Graph load_graph(const std::filesystem::path& path) {
  return graph_from_json(read_json_file(path));
}

void save_graph(const Graph& graph, const std::filesystem::path& path) {
  write_text_file(path, graph_to_json(graph).dump(2) + "\n");
}

}  // namespace tinyfuse
