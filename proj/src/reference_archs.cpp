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

#include "tinyfuse/reference_archs.hpp"

namespace tinyfuse {
namespace {

int encoder_stages(const SyntheticTaskSpec& task) {
  return task.modalities.front().shape.height() >= 64 ? 4 : 3;
}

struct EncoderWidths {
  int first;
  int rest;
};

Graph build(const SyntheticTaskSpec& task, const std::string& name, EncoderWidths widths,
            int hidden) {
  GraphBuilder b(name, task.num_classes());
  std::vector<std::size_t> inputs;
  for (const auto& m : task.modalities) inputs.push_back(b.input(m.name, m.shape));
  const int stages = encoder_stages(task);
  std::vector<std::size_t> features;
  for (std::size_t i = 0; i < task.modalities.size(); ++i) {
    const std::string& m = task.modalities[i].name;
    std::size_t x = inputs[i];
    for (int s = 1; s <= stages; ++s) {
      const std::string tag = m + "_" + std::to_string(s);
      x = b.conv2d(m + "_conv" + std::to_string(s), x, s == 1 ? widths.first : widths.rest, 3);
      x = b.relu(tag + "_relu", x);
      x = b.max_pool(tag + "_pool", x, 2, 2);
    }
    features.push_back(b.flatten(m + "_flatten", x));
  }
  std::size_t x = b.concat("fusion", features);
  x = b.relu("hidden_relu", b.dense("hidden", x, hidden));
  b.softmax("probabilities", b.dense("classifier", x, task.num_classes()));
  return b.build();
}

}  // namespace

Graph reference_teacher(const SyntheticTaskSpec& task) {
  return build(task, task.name + "_teacher", {8, 16}, 256);
}

Graph reference_student(const SyntheticTaskSpec& task) {
  return build(task, task.name + "_student", {8, 8}, 32);
}

ArchSearchSpace reference_search_space(const SyntheticTaskSpec& task) {
  ArchSearchSpace space;
  SearchAxis width{"width", AxisKind::kFilters, {}, {32, 24, 16, 8, 4}};
  SearchAxis separable{"separable", AxisKind::kSeparable, {}, {1}};
  for (const auto& m : task.modalities) {
    for (int s = 1; s <= encoder_stages(task); ++s) {
      const std::string conv = m.name + "_conv" + std::to_string(s);
      width.nodes.push_back(conv);
      if (s > 1) separable.nodes.push_back(conv);
    }
  }
  space.axes = {width, {"hidden_units", AxisKind::kUnits, {"hidden"}, {32}}, separable};
  return space;
}

Graph unimodal_variant(const Graph& graph, const std::string& modality) {
  Graph g = restrict_to_modalities(graph, {modality});
  g.name = graph.name + "_" + modality;
  return g;
}

}  // namespace tinyfuse
