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

#include "tinyfuse/distill.hpp"

#include <cstdio>
#include <sstream>

#include "tinyfuse/random.hpp"

namespace tinyfuse {

void DistillConfig::validate() const {
  if (!(temperature > 0) || !std::isfinite(temperature)) {
    fail(ErrorCode::kInvalidArgument, "temperature must be > 0");
  }
  if (!(alpha >= 0 && alpha <= 1)) {
    fail(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  }
  train.validate();
}

nlohmann::json DistillConfig::to_json() const {
  return {{"temperature", temperature},
          {"alpha", alpha},
          {"literal_student_temperature", literal_student_temperature},
          {"train", train.to_json()}};
}

namespace {

void check_compatible(const FloatModel& teacher, const Graph& student,
                      const Dataset& data) {
  if (teacher.graph.num_classes != student.num_classes ||
      student.num_classes != data.num_classes) {
    fail(ErrorCode::kInvalidArgument,
         "teacher, student and dataset disagree on the class count");
  }
  auto t = teacher.graph.input_names();
  auto s = student.input_names();
  std::sort(t.begin(), t.end());
  std::sort(s.begin(), s.end());
  if (t != s) {
    fail(ErrorCode::kInvalidArgument,
         "teacher '" + teacher.graph.name + "' and student '" + student.name +
             "' use different input modalities");
  }
}

// Teacher logits indexed by sample id (train split only).
std::vector<std::vector<float>> teacher_logits(const FloatModel& teacher,
                                               const Dataset& data,
                                               std::size_t threads) {
  const auto rows = compute_logits(teacher, data, data.train, threads);
  std::vector<std::vector<float>> by_sample(data.size());
  for (std::size_t i = 0; i < data.train.size(); ++i) by_sample[data.train[i]] = rows[i];
  return by_sample;
}

TrainResult distill_with(const std::vector<std::vector<float>>& teacher_rows,
                         FloatModel student, const Dataset& data,
                         const DistillConfig& config) {
  auto objective = [&](std::size_t sample, std::span<const float> logits,
                       std::span<const float>, std::span<float> grad) {
    const auto r = kd_loss<float>(logits, teacher_rows[sample], data.labels[sample], config);
    std::copy(r.grad.begin(), r.grad.end(), grad.begin());
    return static_cast<double>(r.loss);
  };
  TrainResult result = fit(std::move(student), data, config.train, objective);
  result.model.metadata["distill"] = config.to_json();
  return result;
}

}  // namespace

TrainResult distill(const FloatModel& teacher, FloatModel student, const Dataset& data,
                    const DistillConfig& config) {
  config.validate();
  check_compatible(teacher, student.graph, data);
  return distill_with(teacher_logits(teacher, data, config.train.threads),
                      std::move(student), data, config);
}

TrainResult distill(const FloatModel& teacher, const Graph& student_graph,
                    const Dataset& data, const DistillConfig& config) {
  config.validate();
  check_compatible(teacher, student_graph, data);
  return distill(teacher, make_model(student_graph, config.train.seed), data, config);
}

bool search_order(const SearchCandidateResult& a, const SearchCandidateResult& b) {
  if (a.diverged != b.diverged) return !a.diverged;
  if (a.fits() != b.fits()) return a.fits();
  if (a.val_accuracy != b.val_accuracy) return a.val_accuracy > b.val_accuracy;
  return a.id < b.id;
}

std::optional<std::size_t> SearchResult::selected() const {
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].fits() && !candidates[i].diverged) return i;
  }
  return std::nullopt;
}

SearchResult memory_aware_search(const FloatModel& teacher,
                                 const std::vector<Candidate>& candidates,
                                 std::uint64_t budget_bytes,
                                 const HardwareProfile& profile, const Dataset& data,
                                 const DistillConfig& config) {
  config.validate();
  profile.validate();
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "search space is empty");

  SearchResult out;
  out.budget_bytes = budget_bytes;
  out.teacher_float_bytes =
      model_size_bytes(teacher.graph, teacher.shapes, Precision::kFloat32);
  out.teacher_val_accuracy =
      evaluate(teacher, data, Split::kValidation, config.train.threads).accuracy;
  out.teacher_test_accuracy =
      evaluate(teacher, data, Split::kTest, config.train.threads).accuracy;

  for (const auto& c : candidates) check_compatible(teacher, c.graph, data);
  const auto rows = teacher_logits(teacher, data, config.train.threads);

  std::vector<SearchCandidateResult> results;
  std::vector<FloatModel> models;
  for (const auto& c : candidates) {
    SearchCandidateResult r;
    r.id = c.id;
    const ShapeMap shapes = infer_shapes(c.graph);
    r.params = param_count(c.graph, shapes).total;
    r.float_bytes = model_size_bytes(c.graph, shapes, Precision::kFloat32);
    r.int8_bytes = model_size_bytes(c.graph, shapes, Precision::kInt8);
    r.fits_budget = r.int8_bytes <= budget_bytes;
    try {
      r.fits_memory =
          plan(plan_request(c.graph, shapes, Precision::kInt8), profile).fits_on_chip;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDoesNotFit) throw;
      r.fits_memory = false;
    }
    DistillConfig cc = config;
    cc.train.seed = derive_seed(config.train.seed, c.id);
    FloatModel model = make_model(c.graph, cc.train.seed);
    try {
      TrainResult t = distill_with(rows, std::move(model), data, cc);
      r.best_epoch = t.best_epoch;
      r.val_accuracy =
          evaluate(t.model, data, Split::kValidation, config.train.threads).accuracy;
      r.test_accuracy = evaluate(t.model, data, Split::kTest, config.train.threads).accuracy;
      t.model.metadata["candidate"] = c.id;
      model = std::move(t.model);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDiverged) throw;
      r.diverged = true;
      r.error = e.what();
      model = FloatModel{};
    }
    results.push_back(std::move(r));
    models.push_back(std::move(model));
  }

  if (std::all_of(results.begin(), results.end(), [](const auto& r) { return r.diverged; })) {
    std::string msg = "every search candidate diverged:";
    for (const auto& r : results) msg += "\n  " + r.id + ": " + r.error;
    fail(ErrorCode::kDiverged, msg);
  }

  std::vector<std::size_t> order(results.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return search_order(results[a], results[b]);
  });
  for (std::size_t i : order) {
    out.candidates.push_back(std::move(results[i]));
    out.models.push_back(std::move(models[i]));
  }
  return out;
}

nlohmann::json SearchResult::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : candidates) {
    nlohmann::json r = {{"id", c.id},
                        {"params", c.params},
                        {"float_bytes", c.float_bytes},
                        {"int8_bytes", c.int8_bytes},
                        {"val_accuracy", c.val_accuracy},
                        {"test_accuracy", c.test_accuracy},
                        {"best_epoch", c.best_epoch},
                        {"fits_budget", c.fits_budget},
                        {"fits_memory", c.fits_memory},
                        {"fits", c.fits()},
                        {"diverged", c.diverged}};
    if (!c.error.empty()) r["error"] = c.error;
    rows.push_back(r);
  }
  nlohmann::json j = {{"budget_bytes", budget_bytes},
                      {"teacher_float_bytes", teacher_float_bytes},
                      {"teacher_val_accuracy", teacher_val_accuracy},
                      {"teacher_test_accuracy", teacher_test_accuracy},
                      {"candidates", rows}};
  if (const auto s = selected()) {
    j["selected"] = candidates[*s].id;
    j["size_reduction"] = static_cast<double>(teacher_float_bytes) /
                          static_cast<double>(candidates[*s].int8_bytes);
  }
  return j;
}

std::string SearchResult::table() const {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-36s %9s %10s %9s %9s %5s\n", "candidate", "params",
                "float KB", "int8 KB", "accuracy", "fits");
  os << line;
  for (const auto& c : candidates) {
    std::snprintf(line, sizeof line, "%-36s %9llu %10s %9s %8.2f%% %5s\n", c.id.c_str(),
                  static_cast<unsigned long long>(c.params), format_kb(c.float_bytes).c_str(),
                  format_kb(c.int8_bytes).c_str(), 100.0 * c.test_accuracy,
                  c.diverged ? "div" : (c.fits() ? "yes" : "no"));
    os << line;
  }
  return os.str();
}

}  // namespace tinyfuse
