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

#ifndef TINYFUSE_TRAIN_HPP_
#define TINYFUSE_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tinyfuse/dataset.hpp"
#include "tinyfuse/executor.hpp"
#include "tinyfuse/model.hpp"

namespace tinyfuse {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::uint64_t seed = 0;
  bool shuffle = true;
  std::size_t threads = 0;  // 0 = auto

  void validate() const;
  nlohmann::json to_json() const;
};

struct AdamState {
  ParamSet<float> first_moment;
  ParamSet<float> second_moment;
  std::int64_t step = 0;

  static AdamState for_params(const ParamSet<float>& params);
};

// One bias-corrected Adam update; increments state.step.
void adam_step(ParamSet<float>& params, const ParamSet<float>& grads,
               AdamState& state, const TrainConfig& config);

// -mean_b log max(p[b, y_b], 1e-12) for row-major [batch, classes] inputs.
// Throws if a label row is not one-hot or a probability row does not sum to
// 1 within 1e-5.
double cross_entropy(const FloatTensor& probabilities,
                     const FloatTensor& one_hot_labels);

inline constexpr double kProbabilityFloor = 1e-12;

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_accuracy = 0;
};

nlohmann::json trace_to_json(const std::vector<EpochRecord>& trace);

struct TrainResult {
  FloatModel model;  // best-validation checkpoint
  std::vector<EpochRecord> trace;
  int best_epoch = 0;
};

// Maps graph inputs onto dataset modalities by name.
class InputBinder {
 public:
  InputBinder(const Graph& graph, const ShapeMap& shapes, const Dataset& data);
  void gather(const Dataset& data, std::size_t sample,
              std::vector<FloatTensor>& out) const;

 private:
  std::vector<std::size_t> modality_;
  std::vector<TensorShape> shapes_;
};

// Per-sample objective on the classifier logits. Returns the loss and writes
// d loss / d logits into grad_logits.
using SampleObjective = std::function<double(
    std::size_t sample, std::span<const float> logits,
    std::span<const float> probabilities, std::span<float> grad_logits)>;

// Mini-batch Adam on an arbitrary objective. Samples of a batch are split
// into fixed-size shards whose gradients are summed in shard order, so the
// result does not depend on the worker count.
TrainResult fit(FloatModel model, const Dataset& data, const TrainConfig& config,
                const SampleObjective& objective);

// Categorical cross-entropy training on the train split, checkpointing on
// validation accuracy.
TrainResult train(FloatModel model, const Dataset& data, const TrainConfig& config);

struct Evaluation {
  double accuracy = 0;
  std::size_t total = 0;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
  std::vector<int> predictions;                      // in split order
};

Evaluation evaluate(const FloatModel& model, const Dataset& data, Split split,
                    std::size_t threads = 0);

// Classifier logits for every listed sample.
std::vector<std::vector<float>> compute_logits(const FloatModel& model,
                                               const Dataset& data,
                                               const std::vector<std::size_t>& samples,
                                               std::size_t threads = 0);

}  // namespace tinyfuse

#endif  // TINYFUSE_TRAIN_HPP_
