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

#include "test_support.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "tinyfuse/executor.hpp"

namespace testing_support {

using namespace tinyfuse;

SyntheticTaskSpec tiny_task() {
  SyntheticTaskSpec spec;
  spec.name = "tiny";
  spec.modalities = {{"left", TensorShape{8, 8, 1}, 2}, {"right", TensorShape{8, 8, 1}, 2}};
  spec.noise_stddev = 0.3;
  spec.template_seed = 5;
  spec.sample_count = 400;
  return spec;
}

const Dataset& tiny_dataset() {
  static const Dataset data = generate(tiny_task(), 11);
  return data;
}

Graph tiny_network(int width) {
  const auto task = tiny_task();
  GraphBuilder b("tiny_net", task.num_classes());
  std::vector<std::size_t> inputs, features;
  for (const auto& m : task.modalities) inputs.push_back(b.input(m.name, m.shape));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string& m = task.modalities[i].name;
    auto x = b.relu(m + "_relu", b.conv2d(m + "_conv", inputs[i], width, 3));
    features.push_back(b.flatten(m + "_flatten", b.max_pool(m + "_pool", x, 2, 2)));
  }
  auto x = b.concat("fusion", features);
  x = b.dense("classifier", x, task.num_classes());
  b.softmax("probabilities", x);
  return b.build();
}

namespace {

// Appends a random spatial op; returns the new node.
std::size_t spatial_op(GraphBuilder& b, Rng& rng, const std::string& name, std::size_t from,
                       int choice) {
  const Padding pad = rng.below(2) ? Padding::kSame : Padding::kValid;
  switch (choice) {
    case 0:
      return b.conv2d(name, from, 1 + static_cast<int>(rng.below(5)),
                      1 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(2)), pad);
    case 1:
      return b.separable_conv2d(name, from, 1 + static_cast<int>(rng.below(5)),
                                1 + static_cast<int>(rng.below(3)),
                                1 + static_cast<int>(rng.below(2)), pad);
    case 2:
      return b.max_pool(name, from, 2, 1 + static_cast<int>(rng.below(2)), pad);
    case 3:
      return b.avg_pool(name, from, 2 + static_cast<int>(rng.below(2)),
                        1 + static_cast<int>(rng.below(2)), pad);
    default:
      return b.relu(name, from);
  }
}

Graph try_random_graph(Rng& rng, std::size_t max_nodes) {
  // Two inputs need input, input, flatten, flatten, concat, dense, softmax.
  const bool two = max_nodes >= 7 && rng.below(2);
  const int classes = 2 + static_cast<int>(rng.below(4));
  GraphBuilder b("random", classes);
  std::vector<std::size_t> heads;
  heads.push_back(b.input("left", TensorShape{4 + static_cast<std::int64_t>(rng.below(6)),
                                              4 + static_cast<std::int64_t>(rng.below(6)),
                                              1 + static_cast<std::int64_t>(rng.below(3))}));
  if (two) heads.push_back(b.input("right", TensorShape{5, 5, 2}));
  const std::size_t fixed = two ? 7 : 4;  // inputs, flattens, concat, dense, softmax
  std::size_t spare = max_nodes - fixed;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const std::size_t ops = rng.below(spare / heads.size() + 1);
    for (std::size_t k = 0; k < ops; ++k) {
      heads[h] = spatial_op(b, rng, "n" + std::to_string(h) + "_" + std::to_string(k), heads[h],
                            static_cast<int>(rng.below(5)));
    }
    spare -= ops;
    heads[h] = b.flatten("flat" + std::to_string(h), heads[h]);
  }
  std::size_t x = heads.size() == 2 ? b.concat("fusion", heads) : heads[0];
  if (spare > 0 && rng.below(2)) x = b.dense("hidden", x, 1 + static_cast<int>(rng.below(12)));
  x = b.dense("classifier", x, classes);
  b.softmax("probabilities", x);
  return b.build();
}

Graph try_random_fusion_graph(Rng& rng) {
  const SyntheticTaskSpec task = tiny_task();
  GraphBuilder b("fusion", task.num_classes());
  std::vector<std::size_t> heads;
  for (const auto& m : task.modalities) heads.push_back(b.input(m.name, m.shape));
  const bool map_fusion = rng.below(2);
  const int depth = 1 + static_cast<int>(rng.below(3));
  std::vector<int> shared_ops;
  for (int d = 0; d < depth; ++d) shared_ops.push_back(static_cast<int>(rng.below(5)));
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const std::string tag = task.modalities[h].name;
    if (map_fusion) {
      // Identical geometry on every branch keeps the maps concatenable.
      Rng shape_rng(derive_seed(7, std::to_string(depth) + std::to_string(shared_ops[0])));
      for (int d = 0; d < depth; ++d) {
        heads[h] = spatial_op(b, shape_rng, tag + "_op" + std::to_string(d), heads[h],
                              shared_ops[d]);
      }
    } else {
      for (int d = 0; d < depth; ++d) {
        heads[h] = spatial_op(b, rng, tag + "_op" + std::to_string(d), heads[h],
                              static_cast<int>(rng.below(5)));
      }
      heads[h] = b.flatten(tag + "_flatten", heads[h]);
    }
  }
  std::size_t x = b.concat("fusion", heads);
  if (map_fusion) {
    if (rng.below(2)) x = b.conv2d("fused_conv", x, 3, 3);
    x = b.flatten("fused_flatten", x);
  }
  if (rng.below(2)) {
    x = b.dense("hidden", x, 4 + static_cast<int>(rng.below(12)));
    x = b.relu("hidden_relu", x);
  }
  x = b.dense("classifier", x, task.num_classes());
  b.softmax("probabilities", x);
  return b.build();
}

// Draws until the sampled geometry leaves every extent positive.
template <typename Draw>
Graph first_valid(Draw draw) {
  for (;;) {
    try {
      Graph g = draw();
      infer_shapes(g);
      return g;
    } catch (const Error&) {
    }
  }
}

}  // namespace

Graph random_graph(Rng& rng, std::size_t max_nodes) {
  return first_valid([&] { return try_random_graph(rng, max_nodes); });
}

Graph random_fusion_graph(Rng& rng) {
  return first_valid([&] { return try_random_fusion_graph(rng); });
}

FloatModel random_model(const Graph& graph, std::uint64_t seed) {
  FloatModel model = make_model(graph, seed);
  Rng rng(derive_seed(seed, "bias"));
  const ShapeMap& shapes = model.shapes;
  for (std::size_t n = 0; n < graph.nodes.size(); ++n) {
    const auto infos = param_tensors(graph, shapes, n);
    for (std::size_t t = 0; t < infos.size(); ++t) {
      if (!infos[t].is_bias) continue;
      for (auto& v : model.params[n][t].data) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    }
  }
  return model;
}

namespace {

double probe_loss(const BasicModel<double>& model, const std::vector<Tensor<double>>& inputs,
                  std::size_t seed_node, const std::vector<double>& r) {
  const auto acts = forward<double>(model, std::span<const Tensor<double>>(inputs));
  const auto& out = acts.outputs[seed_node].data;
  double loss = 0;
  for (std::size_t i = 0; i < out.size(); ++i) loss += r[i] * out[i];
  return loss;
}

bool close(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale <= 1e-3;
}

std::vector<std::size_t> sample_coords(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx;
  if (n <= count) {
    for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
  } else {
    for (std::size_t i = 0; i < count; ++i) idx.push_back(rng.below(n));
  }
  return idx;
}

}  // namespace

GradCheck gradient_check(const BasicModel<double>& model, const std::vector<Tensor<double>>& inputs,
                         std::size_t seed_node, std::uint64_t seed, std::size_t coords_per_tensor) {
  constexpr double kStep = 1e-4;
  Rng rng(seed);
  const auto acts = forward<double>(model, std::span<const Tensor<double>>(inputs));
  std::vector<double> r(acts.outputs[seed_node].size());
  for (auto& v : r) v = rng.uniform(-1.0, 1.0);
  ParamSet<double> grads = zeros_like<double>(model.params);
  std::vector<Tensor<double>> input_grads;
  backward<double>(model, acts, seed_node, std::span<const double>(r), grads, &input_grads);

  GradCheck result;
  BasicModel<double> probe = model;
  for (std::size_t n = 0; n < probe.params.size(); ++n) {
    for (std::size_t t = 0; t < probe.params[n].size(); ++t) {
      auto& values = probe.params[n][t].data;
      for (std::size_t i : sample_coords(values.size(), coords_per_tensor, rng)) {
        const double saved = values[i];
        values[i] = saved + kStep;
        const double up = probe_loss(probe, inputs, seed_node, r);
        values[i] = saved - kStep;
        const double down = probe_loss(probe, inputs, seed_node, r);
        values[i] = saved;
        ++result.checked;
        if (close(grads[n][t].data[i], (up - down) / (2 * kStep))) ++result.passed;
      }
    }
  }
  std::vector<Tensor<double>> shifted = inputs;
  for (std::size_t k = 0; k < shifted.size(); ++k) {
    auto& values = shifted[k].data;
    for (std::size_t i : sample_coords(values.size(), coords_per_tensor, rng)) {
      const double saved = values[i];
      values[i] = saved + kStep;
      const double up = probe_loss(model, shifted, seed_node, r);
      values[i] = saved - kStep;
      const double down = probe_loss(model, shifted, seed_node, r);
      values[i] = saved;
      ++result.checked;
      if (close(input_grads[k].data[i], (up - down) / (2 * kStep))) ++result.passed;
    }
  }
  return result;
}

std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> cases;
  auto finish = [](GraphBuilder& b, std::size_t x, bool flatten) {
    if (flatten) x = b.flatten("flatten", x);
    x = b.dense("classifier", x, 3);
    b.softmax("probabilities", x);
    Graph g = b.build();
    const std::size_t logits = g.nodes[g.output()].inputs[0];
    return std::make_pair(std::move(g), logits);
  };
  auto add = [&](const std::string& name, std::pair<Graph, std::size_t> gp) {
    cases.push_back({name, std::move(gp.first), gp.second});
  };
  {
    GraphBuilder b("conv_same", 3);
    auto x = b.conv2d("conv", b.input("x", TensorShape{6, 6, 2}), 3, 3, 1, Padding::kSame);
    add("Conv2D same", finish(b, x, true));
  }
  {
    GraphBuilder b("conv_valid", 3);
    auto x = b.conv2d("conv", b.input("x", TensorShape{7, 7, 2}), 3, 3, 2, Padding::kValid);
    add("Conv2D valid stride 2", finish(b, x, true));
  }
  {
    GraphBuilder b("sep", 3);
    auto x = b.separable_conv2d("sep", b.input("x", TensorShape{7, 7, 2}), 4, 3, 2, Padding::kSame);
    add("SeparableConv2D", finish(b, x, true));
  }
  {
    GraphBuilder b("dense", 3);
    auto x = b.dense("hidden", b.input("x", TensorShape{10}), 6);
    add("Dense", finish(b, x, false));
  }
  {
    GraphBuilder b("maxpool", 3);
    auto x = b.max_pool("pool", b.input("x", TensorShape{7, 7, 2}), 3, 2, Padding::kSame);
    add("MaxPool2D", finish(b, x, true));
  }
  {
    GraphBuilder b("avgpool", 3);
    auto x = b.avg_pool("pool", b.input("x", TensorShape{7, 7, 2}), 3, 2, Padding::kSame);
    add("AvgPool2D", finish(b, x, true));
  }
  {
    GraphBuilder b("relu", 3);
    auto x = b.relu("relu", b.input("x", TensorShape{12}));
    add("ReLU", finish(b, x, false));
  }
  {
    GraphBuilder b("flatten", 3);
    auto x = b.input("x", TensorShape{3, 3, 2});
    add("Flatten", finish(b, x, true));
  }
  {
    GraphBuilder b("concat", 3);
    const auto a = b.input("a", TensorShape{4, 4, 1});
    const auto c = b.input("c", TensorShape{4, 4, 2});
    auto x = b.concat("fusion", {a, c});
    add("Concat", finish(b, x, true));
  }
  {
    GraphBuilder b("softmax", 3);
    auto x = b.dense("classifier", b.input("x", TensorShape{5}), 3);
    b.softmax("probabilities", x);
    Graph g = b.build();
    const std::size_t out = g.output();
    cases.push_back({"Softmax", std::move(g), out});
  }
  {
    GraphBuilder b("fused", 3);
    const auto a = b.input("a", TensorShape{8, 8, 1});
    const auto c = b.input("c", TensorShape{6, 6, 2});
    auto xa = b.relu("a_relu", b.conv2d("a_conv", a, 3, 3));
    xa = b.flatten("a_flatten", b.max_pool("a_pool", xa, 2, 2));
    auto xc = b.relu("c_relu", b.separable_conv2d("c_sep", c, 4, 3));
    xc = b.flatten("c_flatten", b.avg_pool("c_pool", xc, 2, 2));
    auto x = b.relu("hidden_relu", b.dense("hidden", b.concat("fusion", {xa, xc}), 8));
    x = b.dense("classifier", x, 3);
    b.softmax("probabilities", x);
    Graph g = b.build();
    const std::size_t out = g.output();
    cases.push_back({"two-branch fused graph", std::move(g), out});
  }
  return cases;
}

TempDir::TempDir(const std::string& tag) {
  path_ = std::filesystem::temp_directory_path() /
          ("tinyfuse_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testing_support
