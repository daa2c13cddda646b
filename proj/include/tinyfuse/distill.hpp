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

#ifndef TINYFUSE_DISTILL_HPP_
#define TINYFUSE_DISTILL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tinyfuse/error.hpp"
#include "tinyfuse/memory.hpp"
#include "tinyfuse/search_space.hpp"
#include "tinyfuse/softmax.hpp"
#include "tinyfuse/train.hpp"

namespace tinyfuse {

struct DistillConfig {
  double temperature = 4.0;
  double alpha = 0.1;  // weight of the hard-label cross-entropy term
  // Compare the softened teacher against the student's plain (T = 1)
  // probabilities, without the T^2 factor.
  bool literal_student_temperature = false;
  TrainConfig train;

  void validate() const;
  nlohmann::json to_json() const;
};

template <typename T>
std::vector<T> soften(std::span<const T> logits, T temperature) {
  if (!(temperature > T(0)) || !std::isfinite(temperature)) {
    fail(ErrorCode::kInvalidArgument, "temperature must be finite and > 0");
  }
  if (logits.empty() || !all_finite<T>(logits)) {
    fail(ErrorCode::kInvalidArgument, "soften needs non-empty finite logits");
  }
  std::vector<T> out(logits.size());
  softmax_with_temperature<T>(logits, temperature, out);
  return out;
}

inline constexpr double kKlProbabilityFloor = 1e-12;

// sum_i q_i log(q_i / max(p_i, 1e-12)), with 0 log 0 = 0 and the result
// clamped at 0 against rounding.
template <typename T>
T kl_divergence(std::span<const T> q, std::span<const T> p) {
  if (q.size() != p.size()) {
    fail(ErrorCode::kShapeMismatch, "kl_divergence: length " + std::to_string(q.size()) +
                                        " vs " + std::to_string(p.size()));
  }
  T sum = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= T(0)) continue;
    const T pi = std::max<T>(p[i], T(kKlProbabilityFloor));
    sum += q[i] * std::log(q[i] / pi);
  }
  return std::max<T>(sum, T(0));
}

template <typename T>
struct KdLoss {
  T loss = 0;
  std::vector<T> grad;  // d loss / d student logits
};

template <typename T>
KdLoss<T> kd_loss(std::span<const T> student_logits, std::span<const T> teacher_logits,
                  int label, const DistillConfig& config) {
  const std::size_t k = student_logits.size();
  if (teacher_logits.size() != k) {
    fail(ErrorCode::kShapeMismatch, "student and teacher class counts differ");
  }
  if (label < 0 || static_cast<std::size_t>(label) >= k) {
    fail(ErrorCode::kInvalidArgument, "label " + std::to_string(label) + " out of range");
  }
  const T temp = static_cast<T>(config.temperature);
  const T alpha = static_cast<T>(config.alpha);
  const auto p = soften<T>(student_logits, T(1));
  const auto q = soften<T>(teacher_logits, temp);
  KdLoss<T> out;
  out.grad.assign(k, T(0));
  const T ce = -std::log(std::max<T>(p[label], T(kProbabilityFloor)));
  if (config.literal_student_temperature) {
    out.loss = alpha * ce + (T(1) - alpha) * kl_divergence<T>(q, p);
    for (std::size_t i = 0; i < k; ++i) {
      const T y = static_cast<std::size_t>(label) == i ? T(1) : T(0);
      out.grad[i] = alpha * (p[i] - y) + (T(1) - alpha) * (p[i] - q[i]);
    }
  } else {
    const auto pt = soften<T>(student_logits, temp);
    out.loss = alpha * ce + (T(1) - alpha) * temp * temp * kl_divergence<T>(q, pt);
    for (std::size_t i = 0; i < k; ++i) {
      const T y = static_cast<std::size_t>(label) == i ? T(1) : T(0);
      out.grad[i] = alpha * (p[i] - y) + (T(1) - alpha) * temp * (pt[i] - q[i]);
    }
  }
  return out;
}

// Trains a fresh student (initialized from config.train.seed) against the
// frozen teacher's logits on the train split.
TrainResult distill(const FloatModel& teacher, const Graph& student_graph,
                    const Dataset& data, const DistillConfig& config);

// Same, continuing from given student weights.
TrainResult distill(const FloatModel& teacher, FloatModel student,
                    const Dataset& data, const DistillConfig& config);

struct SearchCandidateResult {
  std::string id;
  std::uint64_t params = 0;
  std::uint64_t float_bytes = 0;
  std::uint64_t int8_bytes = 0;
  double val_accuracy = 0;
  double test_accuracy = 0;
  int best_epoch = 0;
  bool fits_budget = false;  // int8 size <= budget
  bool fits_memory = false;  // memory plan keeps everything on chip
  bool diverged = false;
  std::string error;

  bool fits() const { return fits_budget && fits_memory; }
};

struct SearchResult {
  std::vector<SearchCandidateResult> candidates;  // sorted best first
  std::vector<FloatModel> models;                 // parallel to candidates
  std::uint64_t teacher_float_bytes = 0;
  double teacher_val_accuracy = 0;
  double teacher_test_accuracy = 0;
  std::uint64_t budget_bytes = 0;

  // First fitting, non-diverged candidate.
  std::optional<std::size_t> selected() const;
  nlohmann::json to_json() const;
  std::string table() const;
};

// Orders by (fits desc, validation accuracy desc, id); diverged last.
bool search_order(const SearchCandidateResult& a, const SearchCandidateResult& b);

SearchResult memory_aware_search(const FloatModel& teacher,
                                 const std::vector<Candidate>& candidates,
                                 std::uint64_t budget_bytes,
                                 const HardwareProfile& profile, const Dataset& data,
                                 const DistillConfig& config);

}  // namespace tinyfuse

#endif  // TINYFUSE_DISTILL_HPP_
