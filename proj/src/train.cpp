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

#include "tinyfuse/train.hpp"

#include <algorithm>
#include <cmath>

#include "tinyfuse/error.hpp"
#include "tinyfuse/parallel.hpp"
#include "tinyfuse/random.hpp"

namespace tinyfuse {
namespace {

constexpr std::size_t kShardSize = 4;

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) {
    fail(ErrorCode::kInvalidArgument,
         "epochs must be >= 1, got " + std::to_string(epochs));
  }
  if (batch_size < 1) {
    fail(ErrorCode::kInvalidArgument,
         "batch size must be >= 1, got " + std::to_string(batch_size));
  }
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    fail(ErrorCode::kInvalidArgument, "learning rate must be > 0");
  }
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0)) {
    fail(ErrorCode::kInvalidArgument, "Adam needs 0 <= beta < 1 and epsilon > 0");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},       {"batch_size", batch_size},
          {"learning_rate", learning_rate}, {"beta1", beta1},
          {"beta2", beta2},         {"epsilon", epsilon},
          {"seed", seed},           {"shuffle", shuffle}};
}

AdamState AdamState::for_params(const ParamSet<float>& params) {
  AdamState s;
  s.first_moment = zeros_like<float>(params);
  s.second_moment = zeros_like<float>(params);
  return s;
}

void adam_step(ParamSet<float>& params, const ParamSet<float>& grads,
               AdamState& state, const TrainConfig& config) {
  ++state.step;
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t n = 0; n < params.size(); ++n) {
    for (std::size_t t = 0; t < params[n].size(); ++t) {
      auto& p = params[n][t].data;
      const auto& g = grads[n][t].data;
      auto& m = state.first_moment[n][t].data;
      auto& v = state.second_moment[n][t].data;
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        const double mi = b1 * m[i] + (1.0 - b1) * gi;
        const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        const double step =
            config.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + config.epsilon);
        p[i] = static_cast<float>(p[i] - step);
      }
    }
  }
}

double cross_entropy(const FloatTensor& probabilities,
                     const FloatTensor& one_hot_labels) {
  const auto& ps = probabilities.shape;
  if (ps.rank() != 2 || !(ps == one_hot_labels.shape)) {
    fail(ErrorCode::kShapeMismatch,
         "cross entropy needs matching [batch, classes] tensors, got " +
             ps.to_string() + " and " + one_hot_labels.shape.to_string());
  }
  const std::size_t rows = ps[0], k = ps[1];
  double total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0;
    std::size_t hot = k;
    int ones = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const float y = one_hot_labels.data[r * k + c];
      sum += probabilities.data[r * k + c];
      if (y == 1.0f) {
        hot = c;
        ++ones;
      } else if (y != 0.0f) {
        ones = -1;
        break;
      }
    }
    if (ones != 1) {
      fail(ErrorCode::kInvalidArgument,
           "label row " + std::to_string(r) + " is not one-hot");
    }
    if (std::abs(sum - 1.0) > 1e-5) {
      fail(ErrorCode::kInvalidArgument,
           "probability row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
    const double p = std::max<double>(probabilities.data[r * k + hot], kProbabilityFloor);
    total -= std::log(p);
  }
  return total / static_cast<double>(rows);
}

nlohmann::json trace_to_json(const std::vector<EpochRecord>& trace) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : trace) {
    j.push_back({{"epoch", r.epoch},
                 {"train_loss", r.train_loss},
                 {"train_accuracy", r.train_accuracy},
                 {"val_accuracy", r.val_accuracy}});
  }
  return j;
}

InputBinder::InputBinder(const Graph& graph, const ShapeMap& shapes,
                         const Dataset& data) {
  for (std::size_t id : graph.input_nodes()) {
    const std::string& name = graph.nodes[id].name;
    const auto m = data.modality_index(name);
    if (!m) {
      fail(ErrorCode::kInvalidArgument,
           "dataset has no modality '" + name + "' required by graph '" + graph.name + "'");
    }
    if (!(data.modalities[*m].shape == shapes[id])) {
      fail(ErrorCode::kShapeMismatch,
           "modality '" + name + "' has shape " + data.modalities[*m].shape.to_string() +
               " but the graph expects " + shapes[id].to_string());
    }
    modality_.push_back(*m);
    shapes_.push_back(shapes[id]);
  }
}

void InputBinder::gather(const Dataset& data, std::size_t sample,
                         std::vector<FloatTensor>& out) const {
  out.resize(modality_.size());
  for (std::size_t i = 0; i < modality_.size(); ++i) {
    const auto src = data.sample(modality_[i], sample);
    out[i].shape = shapes_[i];
    out[i].data.assign(src.begin(), src.end());
  }
}

TrainResult fit(FloatModel model, const Dataset& data, const TrainConfig& config,
                const SampleObjective& objective) {
  config.validate();
  if (data.train.empty()) {
    fail(ErrorCode::kInvalidArgument, "training split is empty");
  }
  const InputBinder binder(model.graph, model.shapes, data);
  const std::size_t logits_id = logits_node(model.graph);
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  const std::size_t max_shards = (batch + kShardSize - 1) / kShardSize;

  AdamState adam = AdamState::for_params(model.params);
  std::vector<ParamSet<float>> shard_grads(max_shards);
  for (auto& g : shard_grads) g = zeros_like<float>(model.params);
  ParamSet<float> grads = zeros_like<float>(model.params);

  Rng rng(derive_seed(config.seed, "shuffle"));
  std::vector<std::size_t> order = data.train;

  TrainResult result;
  result.model = model;
  double best_val = -1;
  std::vector<double> sample_loss(batch);
  std::vector<char> sample_correct(batch);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) rng.shuffle(order);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0, b = 0; start < order.size(); start += batch, ++b) {
      const std::size_t count = std::min(batch, order.size() - start);
      const std::size_t shards = (count + kShardSize - 1) / kShardSize;
      try {
        parallel_for(shards, config.threads, [&](std::size_t s) {
          ParamSet<float>& g = shard_grads[s];
          fill_zero(g);
          std::vector<FloatTensor> inputs;
          std::vector<float> grad_logits;
          const std::size_t end = std::min(count, (s + 1) * kShardSize);
          for (std::size_t i = s * kShardSize; i < end; ++i) {
            const std::size_t sample = order[start + i];
            binder.gather(data, sample, inputs);
            const auto acts = forward<float>(model, std::span<const FloatTensor>(inputs));
            const auto logits = acts.outputs[logits_id].span();
            const auto probs = acts.probabilities();
            grad_logits.assign(logits.size(), 0.0f);
            sample_loss[i] = objective(sample, logits, probs, grad_logits);
            sample_correct[i] =
                static_cast<int>(argmax(probs)) == data.labels[sample];
            backward<float>(model, acts, logits_id,
                            std::span<const float>(grad_logits), g);
          }
        });
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNumeric) throw;
        fail(ErrorCode::kDiverged, "training diverged at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(b) + ": " + e.what());
      }
      fill_zero(grads);
      const float inv = 1.0f / static_cast<float>(count);
      for (std::size_t s = 0; s < shards; ++s) {
        for (std::size_t n = 0; n < grads.size(); ++n) {
          for (std::size_t t = 0; t < grads[n].size(); ++t) {
            auto& dst = grads[n][t].data;
            const auto& src = shard_grads[s][n][t].data;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
          }
        }
      }
      for (auto& node : grads) {
        for (auto& t : node) {
          for (float& v : t.data) v *= inv;
        }
      }
      double batch_loss = 0;
      for (std::size_t i = 0; i < count; ++i) {
        batch_loss += sample_loss[i];
        correct += sample_correct[i] ? 1 : 0;
      }
      if (!std::isfinite(batch_loss)) {
        fail(ErrorCode::kDiverged, "training loss is not finite at epoch " +
                                       std::to_string(epoch) + ", batch " +
                                       std::to_string(b));
      }
      loss_sum += batch_loss;
      adam_step(model.params, grads, adam, config);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.val_accuracy = data.validation.empty()
                           ? rec.train_accuracy
                           : evaluate(model, data, Split::kValidation, config.threads).accuracy;
    result.trace.push_back(rec);
    if (rec.val_accuracy > best_val) {
      best_val = rec.val_accuracy;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  result.model.metadata["train"] = config.to_json();
  result.model.metadata["best_epoch"] = result.best_epoch;
  result.model.metadata["epochs"] = config.epochs;
  result.model.metadata["task_fingerprint"] = data.fingerprint();
  return result;
}

TrainResult train(FloatModel model, const Dataset& data, const TrainConfig& config) {
  if (model.graph.num_classes != data.num_classes) {
    fail(ErrorCode::kInvalidArgument,
         "graph '" + model.graph.name + "' has " + std::to_string(model.graph.num_classes) +
             " classes, dataset has " + std::to_string(data.num_classes));
  }
  auto objective = [&](std::size_t sample, std::span<const float>,
                       std::span<const float> probs, std::span<float> grad) {
    const auto y = static_cast<std::size_t>(data.labels[sample]);
    for (std::size_t c = 0; c < probs.size(); ++c) {
      grad[c] = probs[c] - (c == y ? 1.0f : 0.0f);
    }
    return -std::log(std::max<double>(probs[y], kProbabilityFloor));
  };
  return fit(std::move(model), data, config, objective);
}

std::vector<std::vector<float>> compute_logits(const FloatModel& model,
                                               const Dataset& data,
                                               const std::vector<std::size_t>& samples,
                                               std::size_t threads) {
  const InputBinder binder(model.graph, model.shapes, data);
  const std::size_t logits_id = logits_node(model.graph);
  std::vector<std::vector<float>> out(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    std::vector<FloatTensor> inputs;
    binder.gather(data, samples[i], inputs);
    const auto acts = forward<float>(model, std::span<const FloatTensor>(inputs));
    out[i] = acts.outputs[logits_id].data;
  });
  return out;
}

Evaluation evaluate(const FloatModel& model, const Dataset& data, Split split,
                    std::size_t threads) {
  const auto& samples = data.split(split);
  if (samples.empty()) {
    fail(ErrorCode::kInvalidArgument,
         std::string("cannot evaluate on empty split '") + split_name(split) + "'");
  }
  const InputBinder binder(model.graph, model.shapes, data);
  Evaluation ev;
  ev.total = samples.size();
  ev.predictions.resize(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    std::vector<FloatTensor> inputs;
    binder.gather(data, samples[i], inputs);
    const auto acts = forward<float>(model, std::span<const FloatTensor>(inputs));
    ev.predictions[i] = static_cast<int>(argmax(acts.probabilities()));
  });
  const auto k = static_cast<std::size_t>(model.graph.num_classes);
  ev.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto y = static_cast<std::size_t>(data.labels[samples[i]]);
    ev.confusion[y][ev.predictions[i]]++;
    correct += ev.predictions[i] == static_cast<int>(y);
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return ev;
}

}  // namespace tinyfuse
