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

#ifndef TINYFUSE_MODEL_HPP_
#define TINYFUSE_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tinyfuse/error.hpp"
#include "tinyfuse/graph.hpp"
#include "tinyfuse/tensor.hpp"

namespace tinyfuse {

// Parameters indexed [node][tensor] in param_tensors() order; nodes without
// parameters hold an empty list.
template <typename T>
using ParamSet = std::vector<std::vector<Tensor<T>>>;

template <typename T>
struct BasicModel {
  Graph graph;
  ShapeMap shapes;
  ParamSet<T> params;
  // Seed, epoch count, best epoch, dataset fingerprint, and similar.
  nlohmann::json metadata = nlohmann::json::object();
};

using FloatModel = BasicModel<float>;

// He-style fan-in-scaled uniform weights, zero biases.
FloatModel make_model(const Graph& graph, std::uint64_t seed);

template <typename T, typename U>
ParamSet<T> zeros_like(const ParamSet<U>& params) {
  ParamSet<T> out(params.size());
  for (std::size_t n = 0; n < params.size(); ++n) {
    for (const auto& t : params[n]) out[n].emplace_back(t.shape, T(0));
  }
  return out;
}

template <typename T>
void fill_zero(ParamSet<T>& params) {
  for (auto& node : params) {
    for (auto& t : node) std::fill(t.data.begin(), t.data.end(), T(0));
  }
}

template <typename To, typename From>
BasicModel<To> cast_model(const BasicModel<From>& model) {
  BasicModel<To> out;
  out.graph = model.graph;
  out.shapes = model.shapes;
  out.metadata = model.metadata;
  out.params.resize(model.params.size());
  for (std::size_t n = 0; n < model.params.size(); ++n) {
    for (const auto& t : model.params[n]) {
      Tensor<To> c(t.shape);
      for (std::size_t i = 0; i < t.size(); ++i) c.data[i] = static_cast<To>(t.data[i]);
      out.params[n].push_back(std::move(c));
    }
  }
  return out;
}

// Parameter tensors match the graph's parameterized nodes exactly.
template <typename T>
void validate_model(const BasicModel<T>& model) {
  const ShapeMap shapes = infer_shapes(model.graph);
  if (!(shapes == model.shapes)) {
    fail(ErrorCode::kShapeMismatch, "model shapes disagree with its graph");
  }
  if (model.params.size() != model.graph.nodes.size()) {
    fail(ErrorCode::kFormat, "model parameter table does not match its graph");
  }
  for (std::size_t n = 0; n < model.graph.nodes.size(); ++n) {
    const auto expected = param_tensors(model.graph, shapes, n);
    if (expected.size() != model.params[n].size()) {
      fail(ErrorCode::kFormat, "node '" + model.graph.nodes[n].name +
                                   "' has the wrong number of parameter tensors");
    }
    for (std::size_t t = 0; t < expected.size(); ++t) {
      const auto& p = model.params[n][t];
      if (!(p.shape == expected[t].shape) ||
          p.data.size() != expected[t].shape.element_count()) {
        fail(ErrorCode::kShapeMismatch,
             "parameter '" + model.graph.nodes[n].name + "/" + expected[t].name +
                 "' has shape " + p.shape.to_string() + ", expected " +
                 expected[t].shape.to_string());
      }
    }
  }
}

// SHA-256 hex digest over every parameter value, in storage order.
std::string parameter_checksum(const FloatModel& model);

}  // namespace tinyfuse

#endif  // TINYFUSE_MODEL_HPP_
