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

#ifndef TINYFUSE_MEMORY_HPP_
#define TINYFUSE_MEMORY_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tinyfuse/graph.hpp"

namespace tinyfuse {

struct MemoryLevel {
  std::string label;
  std::uint64_t capacity_bytes = 0;
  std::uint64_t available_bytes = 0;
  double latency_penalty = 1.0;  // multiplier when the plan touches this level
};

// Memory levels are ordered from smallest to largest; the last one is the
// off-chip (DRAM-class) level.
struct HardwareProfile {
  std::string name;
  std::vector<MemoryLevel> levels;
  int cores = 1;
  double frequency_mhz = 1.0;
  int macs_per_cycle = 1;

  void validate() const;
};

nlohmann::json profile_to_json(const HardwareProfile& profile);
HardwareProfile profile_from_json(const nlohmann::json& j);
HardwareProfile builtin_profile(const std::string& name);  // gap8, cortex-a72
std::vector<std::string> builtin_profile_names();
// A built-in profile name or a path to a profile JSON file.
HardwareProfile load_profile(const std::string& name_or_path);

inline constexpr std::uint64_t kBytesPerKB = 1000;

struct BufferInterval {
  std::string name;
  std::size_t producer = 0;       // execution step that writes the buffer
  std::size_t last_consumer = 0;  // last step that reads it (inclusive)
  std::uint64_t bytes = 0;
};

struct BufferLiveness {
  std::vector<BufferInterval> buffers;
  std::size_t steps = 0;
};

struct LivenessOptions {
  // A ReLU that is the sole reader of its input overwrites that buffer.
  bool inplace_relu = true;
};

// Liveness over an abstract DAG whose step i produces a buffer of bytes[i]
// and reads the buffers of preds[i] (all < i).
BufferLiveness dag_liveness(const std::vector<std::vector<std::size_t>>& preds,
                            const std::vector<std::uint64_t>& bytes);

// One buffer per node output plus the depthwise intermediate of each
// SeparableConv2D, with steps in node-id order. In int8 precision the
// Softmax output stays float.
BufferLiveness liveness(const Graph& graph, const ShapeMap& shapes,
                        Precision precision, const LivenessOptions& options = {});

std::uint64_t peak_activation_bytes(const BufferLiveness& liveness);
// Per-step sums of live bytes.
std::vector<std::uint64_t> live_bytes_per_step(const BufferLiveness& liveness);

struct NamedBytes {
  std::string name;
  std::uint64_t bytes = 0;
};

struct PlanRequest {
  std::uint64_t activation_peak_bytes = 0;
  std::vector<NamedBytes> weights;
  std::vector<NamedBytes> layer_working_sets;  // optional, for warnings
};

PlanRequest plan_request(const Graph& graph, const ShapeMap& shapes,
                         Precision precision, const LivenessOptions& options = {});

struct LevelUsage {
  std::string label;
  std::uint64_t available_bytes = 0;
  std::uint64_t activation_bytes = 0;
  std::uint64_t weight_bytes = 0;
  int utilization_percent = 0;

  std::uint64_t used_bytes() const { return activation_bytes + weight_bytes; }
  // "52.4 (99%)"
  std::string cell() const;
};

struct Placement {
  std::string name;
  std::uint64_t bytes = 0;
  std::size_t level = 0;
};

struct MemoryPlan {
  std::string profile;
  std::uint64_t activation_peak_bytes = 0;
  std::size_t activation_level = 0;
  std::vector<Placement> weights;
  std::vector<LevelUsage> levels;
  bool fits_on_chip = false;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  std::string table() const;
};

// Greedy placement: the activation arena goes to the smallest level that
// holds the peak; weight tensors go first-fit to the levels after it. Throws
// kDoesNotFit when even the outermost level overflows.
MemoryPlan plan(const PlanRequest& request, const HardwareProfile& profile);

// used / available as a whole percent, ties to even, computed exactly.
int utilization_percent(std::uint64_t used, std::uint64_t available);
// Kilobytes with at most one decimal, trailing ".0" dropped.
std::string format_kb(std::uint64_t bytes);

struct LatencyEstimate {
  double milliseconds = 0;
  double penalty = 1;
  std::string label = "ESTIMATE";
};

LatencyEstimate latency_estimate(std::uint64_t ops, const HardwareProfile& profile,
                                 const MemoryPlan& plan);

}  // namespace tinyfuse

#endif  // TINYFUSE_MEMORY_HPP_
