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

#ifndef TINYFUSE_GRAPH_JSON_HPP_
#define TINYFUSE_GRAPH_JSON_HPP_

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "tinyfuse/graph.hpp"

namespace tinyfuse {

// Graph configuration schema version written into every file.
inline constexpr int kGraphSchemaVersion = 1;

// {"version":1,"name":..,"num_classes":..,
//  "inputs":[{"name":..,"shape":[h,w,c]}],
//  "nodes":[{"name":..,"op":"conv2d","inputs":[..],"filters":..,
//            "kernel":..,"stride":..,"padding":"same"}, ...]}
// The last entry of "nodes" is the output.
nlohmann::json graph_to_json(const Graph& graph);
Graph graph_from_json(const nlohmann::json& j);

Graph load_graph(const std::filesystem::path& path);
void save_graph(const Graph& graph, const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& text);

}  // namespace tinyfuse

#endif  // TINYFUSE_GRAPH_JSON_HPP_
