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

#include "tinyfuse/model.hpp"

#include <cmath>

#include "tinyfuse/checksum.hpp"
#include "tinyfuse/random.hpp"

namespace tinyfuse {

FloatModel make_model(const Graph& graph, std::uint64_t seed) {
  FloatModel model;
  model.graph = graph;
  model.shapes = infer_shapes(graph);
  model.params.resize(graph.nodes.size());
  Rng rng(seed);
  for (std::size_t n = 0; n < graph.nodes.size(); ++n) {
    const Node& node = graph.nodes[n];
    const std::int64_t cin =
        node.inputs.empty() ? 0 : model.shapes[node.inputs[0]].channels();
    for (const auto& info : param_tensors(graph, model.shapes, n)) {
      FloatTensor t(info.shape);
      if (!info.is_bias) {
        double fan_in = 1;
        if (node.spec.kind == LayerKind::kConv2D) {
          fan_in = double(node.spec.kernel) * node.spec.kernel * cin;
        } else if (info.name == "depthwise") {
          fan_in = double(node.spec.kernel) * node.spec.kernel;
        } else {
          fan_in = double(cin);
        }
        const double limit = std::sqrt(6.0 / fan_in);
        for (float& v : t.data) v = static_cast<float>(rng.uniform(-limit, limit));
      }
      model.params[n].push_back(std::move(t));
    }
  }
  model.metadata["init_seed"] = seed;
  return model;
}

std::string parameter_checksum(const FloatModel& model) {
  Sha256 h;
  for (const auto& node : model.params) {
    for (const auto& t : node) h.update(t.span());
  }
  return h.hex_digest();
}

}  // namespace tinyfuse
