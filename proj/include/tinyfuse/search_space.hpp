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

#ifndef TINYFUSE_SEARCH_SPACE_HPP_
#define TINYFUSE_SEARCH_SPACE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tinyfuse/graph.hpp"

namespace tinyfuse {

enum class AxisKind {
  kFilters,    // sets filters on the listed convolution nodes
  kUnits,      // sets units on the listed (non-classifier) dense nodes
  kSeparable,  // 0/1: swaps the listed Conv2D nodes for SeparableConv2D
};

// One dimension of the student grid. Every choice applies the same value
// to all listed nodes.
struct SearchAxis {
  std::string name;
  AxisKind kind = AxisKind::kFilters;
  std::vector<std::string> nodes;
  std::vector<int> values;
};

struct ArchSearchSpace {
  std::vector<SearchAxis> axes;

  // Cartesian product size; throws if any axis is empty.
  std::uint64_t size() const;
};

struct Candidate {
  // Canonical "axis=value" list over axes sorted by name; independent of the
  // order axes and values are listed in.
  std::string id;
  Graph graph;
};

// Lexicographic enumeration in axis order, last axis varying fastest.
std::vector<Candidate> enumerate_candidates(const ArchSearchSpace& space,
                                            const Graph& template_graph);

nlohmann::json search_space_to_json(const ArchSearchSpace& space);
ArchSearchSpace search_space_from_json(const nlohmann::json& j);

}  // namespace tinyfuse

#endif  // TINYFUSE_SEARCH_SPACE_HPP_
