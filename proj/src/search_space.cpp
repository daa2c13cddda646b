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

#include "tinyfuse/search_space.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "tinyfuse/error.hpp"

namespace tinyfuse {
namespace {

const char* axis_kind_name(AxisKind kind) {
  switch (kind) {
    case AxisKind::kFilters: return "filters";
    case AxisKind::kUnits: return "units";
    case AxisKind::kSeparable: return "separable";
  }
  return "?";
}

void check_axes(const ArchSearchSpace& space, const Graph& g) {
  std::set<std::string> names;
  for (const SearchAxis& axis : space.axes) {
    if (!names.insert(axis.name).second) {
      fail(ErrorCode::kInvalidArgument,
           "search axis name '" + axis.name + "' is duplicated");
    }
    if (axis.values.empty()) {
      fail(ErrorCode::kInvalidArgument,
           "search axis '" + axis.name + "' has no values");
    }
    for (const std::string& node : axis.nodes) {
      const auto id = g.find(node);
      if (!id) {
        fail(ErrorCode::kInvalidArgument, "search axis '" + axis.name +
                                              "' references unknown node '" +
                                              node + "'");
      }
      const LayerKind kind = g.nodes[*id].spec.kind;
      switch (axis.kind) {
        case AxisKind::kFilters:
        case AxisKind::kSeparable:
          if (!is_convolution(kind)) {
            fail(ErrorCode::kInvalidArgument,
                 "search axis '" + axis.name + "' references non-convolution node '" +
                     node + "'");
          }
          break;
        case AxisKind::kUnits:
          if (kind != LayerKind::kDense || g.nodes[g.output()].inputs[0] == *id) {
            fail(ErrorCode::kInvalidArgument,
                 "search axis '" + axis.name +
                     "' must reference hidden dense nodes, not '" + node + "'");
          }
          break;
      }
    }
    for (int v : axis.values) {
      const bool ok = axis.kind == AxisKind::kSeparable ? (v == 0 || v == 1) : v >= 1;
      if (!ok) {
        fail(ErrorCode::kInvalidArgument, "search axis '" + axis.name +
                                              "' has invalid value " +
                                              std::to_string(v));
      }
    }
  }
}

}  // namespace

std::uint64_t ArchSearchSpace::size() const {
  std::uint64_t n = 1;
  for (const SearchAxis& axis : axes) {
    if (axis.values.empty()) {
      fail(ErrorCode::kInvalidArgument,
           "search axis '" + axis.name + "' has no values");
    }
    if (n > std::numeric_limits<std::uint64_t>::max() / axis.values.size()) {
      fail(ErrorCode::kInvalidArgument, "search space size overflows");
    }
    n *= axis.values.size();
  }
  return n;
}

std::vector<Candidate> enumerate_candidates(const ArchSearchSpace& space,
                                            const Graph& template_graph) {
  validate_graph(template_graph);
  check_axes(space, template_graph);
  const std::uint64_t total = space.size();

  std::vector<std::size_t> by_name(space.axes.size());
  for (std::size_t i = 0; i < by_name.size(); ++i) by_name[i] = i;
  std::sort(by_name.begin(), by_name.end(), [&](std::size_t a, std::size_t b) {
    return space.axes[a].name < space.axes[b].name;
  });

  std::vector<Candidate> out;
  out.reserve(total);
  std::vector<std::size_t> digit(space.axes.size(), 0);
  for (std::uint64_t c = 0; c < total; ++c) {
    Graph g = template_graph;
    for (std::size_t a = 0; a < space.axes.size(); ++a) {
      const SearchAxis& axis = space.axes[a];
      const int value = axis.values[digit[a]];
      for (const std::string& name : axis.nodes) {
        LayerSpec& s = g.nodes[g.at(name)].spec;
        switch (axis.kind) {
          case AxisKind::kFilters: s.filters = value; break;
          case AxisKind::kUnits: s.units = value; break;
          case AxisKind::kSeparable:
            s.kind = value ? LayerKind::kSeparableConv2D : LayerKind::kConv2D;
            break;
        }
      }
    }
    std::string id;
    for (std::size_t a : by_name) {
      if (!id.empty()) id += ",";
      id += space.axes[a].name + "=" + std::to_string(space.axes[a].values[digit[a]]);
    }
    validate_graph(g);
    g.name = template_graph.name + "{" + id + "}";
    out.push_back(Candidate{id, std::move(g)});
    for (std::size_t a = space.axes.size(); a-- > 0;) {
      if (++digit[a] < space.axes[a].values.size()) break;
      digit[a] = 0;
    }
  }
  return out;
}

nlohmann::json search_space_to_json(const ArchSearchSpace& space) {
  nlohmann::json j;
  j["version"] = 1;
  j["axes"] = nlohmann::json::array();
  for (const SearchAxis& axis : space.axes) {
    j["axes"].push_back({{"name", axis.name},
                         {"kind", axis_kind_name(axis.kind)},
                         {"nodes", axis.nodes},
                         {"values", axis.values}});
  }
  return j;
}

ArchSearchSpace search_space_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) {
    fail(ErrorCode::kFormat, "search space: unsupported or missing version");
  }
  ArchSearchSpace space;
  try {
    for (const auto& a : j.at("axes")) {
      SearchAxis axis;
      axis.name = a.at("name").get<std::string>();
      const auto kind = a.at("kind").get<std::string>();
      if (kind == "filters") axis.kind = AxisKind::kFilters;
      else if (kind == "units") axis.kind = AxisKind::kUnits;
      else if (kind == "separable") axis.kind = AxisKind::kSeparable;
      else fail(ErrorCode::kFormat, "search space: unknown axis kind '" + kind + "'");
      axis.nodes = a.at("nodes").get<std::vector<std::string>>();
      axis.values = a.at("values").get<std::vector<int>>();
      space.axes.push_back(std::move(axis));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("search space: ") + e.what());
  }
  return space;
}

}  // namespace tinyfuse
