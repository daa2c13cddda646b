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

#include "tinyfuse/memory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tinyfuse/error.hpp"
#include "tinyfuse/graph_json.hpp"

namespace tinyfuse {

void HardwareProfile::validate() const {
  if (name.empty()) fail(ErrorCode::kInvalidArgument, "hardware profile needs a name");
  if (levels.empty()) {
    fail(ErrorCode::kInvalidArgument, "profile '" + name + "' has no memory levels");
  }
  if (cores < 1 || macs_per_cycle < 1 || !(frequency_mhz > 0)) {
    fail(ErrorCode::kInvalidArgument,
         "profile '" + name + "' needs positive cores, frequency and MACs per cycle");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& l = levels[i];
    if (l.available_bytes > l.capacity_bytes) {
      fail(ErrorCode::kInvalidArgument, "level " + l.label + " of profile '" + name +
                                            "' has more available than capacity bytes");
    }
    if (i > 0 && l.capacity_bytes < levels[i - 1].capacity_bytes) {
      fail(ErrorCode::kInvalidArgument,
           "levels of profile '" + name + "' must be ordered smallest to largest");
    }
    if (!(l.latency_penalty >= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "latency penalty of level " + l.label + " must be >= 1");
    }
  }
}

nlohmann::json profile_to_json(const HardwareProfile& p) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : p.levels) {
    levels.push_back({{"label", l.label},
                      {"capacity_bytes", l.capacity_bytes},
                      {"available_bytes", l.available_bytes},
                      {"latency_penalty", l.latency_penalty}});
  }
  return {{"name", p.name},
          {"cores", p.cores},
          {"frequency_mhz", p.frequency_mhz},
          {"macs_per_cycle", p.macs_per_cycle},
          {"levels", levels}};
}

HardwareProfile profile_from_json(const nlohmann::json& j) {
  HardwareProfile p;
  try {
    p.name = j.at("name").get<std::string>();
    p.cores = j.at("cores").get<int>();
    p.frequency_mhz = j.at("frequency_mhz").get<double>();
    p.macs_per_cycle = j.at("macs_per_cycle").get<int>();
    for (const auto& l : j.at("levels")) {
      MemoryLevel level;
      level.label = l.at("label").get<std::string>();
      level.capacity_bytes = l.at("capacity_bytes").get<std::uint64_t>();
      level.available_bytes = l.at("available_bytes").get<std::uint64_t>();
      level.latency_penalty = l.value("latency_penalty", 1.0);
      p.levels.push_back(level);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed hardware profile: ") + e.what());
  }
  p.validate();
  return p;
}

HardwareProfile builtin_profile(const std::string& name) {
  HardwareProfile p;
  p.name = name;
  if (name == "gap8") {
    p.cores = 8;
    p.frequency_mhz = 175;
    p.macs_per_cycle = 4;
    p.levels = {{"L1", 100'000, 52'700, 1.0},
                {"L2", 512'000, 400'000, 1.5},
                {"DRAM", 8'000'000, 8'000'000, 4.0}};
  } else if (name == "cortex-a72") {
    p.cores = 4;
    p.frequency_mhz = 1500;
    p.macs_per_cycle = 8;
    p.levels = {{"L1", 80'000, 80'000, 1.0},
                {"L2", 1'024'000, 1'024'000, 1.2},
                {"DRAM", 4'000'000'000, 4'000'000'000, 2.0}};
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown hardware profile '" + name +
                                          "' (built-in: gap8, cortex-a72)");
  }
  return p;
}

std::vector<std::string> builtin_profile_names() { return {"gap8", "cortex-a72"}; }

HardwareProfile load_profile(const std::string& name_or_path) {
  for (const auto& n : builtin_profile_names()) {
    if (n == name_or_path) return builtin_profile(n);
  }
  return profile_from_json(read_json_file(name_or_path));
}

BufferLiveness dag_liveness(const std::vector<std::vector<std::size_t>>& preds,
                            const std::vector<std::uint64_t>& bytes) {
  if (preds.size() != bytes.size()) {
    fail(ErrorCode::kInvalidArgument, "liveness needs one size per step");
  }
  BufferLiveness out;
  out.steps = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    out.buffers.push_back({"step" + std::to_string(i), i, i, bytes[i]});
    for (std::size_t p : preds[i]) {
      if (p >= i) {
        fail(ErrorCode::kInvalidGraph, "step " + std::to_string(i) +
                                           " reads a buffer that is not produced yet");
      }
      out.buffers[p].last_consumer = std::max(out.buffers[p].last_consumer, i);
    }
  }
  return out;
}

BufferLiveness liveness(const Graph& graph, const ShapeMap& shapes,
                        Precision precision, const LivenessOptions& options) {
  validate_graph(graph);
  const std::uint64_t elem = precision == Precision::kInt8 ? 1 : 4;
  const std::size_t n = graph.nodes.size();
  // owner[i]: buffer index holding node i's output.
  std::vector<std::size_t> owner(n);
  const auto consumers = graph.consumers();
  BufferLiveness out;
  out.steps = n;
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = graph.nodes[i];
    for (std::size_t p : node.inputs) {
      auto& b = out.buffers[owner[p]];
      b.last_consumer = std::max(b.last_consumer, i);
    }
    if (node.spec.kind == LayerKind::kReLU && options.inplace_relu &&
        consumers[node.inputs[0]].size() == 1) {
      owner[i] = owner[node.inputs[0]];
      continue;
    }
    if (node.spec.kind == LayerKind::kSeparableConv2D) {
      const auto& in = shapes[node.inputs[0]];
      const auto g = window_geometry(in.height(), node.spec.kernel, node.spec.stride,
                                     node.spec.padding);
      const auto gw = window_geometry(in.width(), node.spec.kernel, node.spec.stride,
                                      node.spec.padding);
      const std::uint64_t mid =
          static_cast<std::uint64_t>(g.out * gw.out * in.channels()) * elem;
      out.buffers.push_back({node.name + "/dw", i, i, mid});
    }
    const std::uint64_t size =
        node.spec.kind == LayerKind::kSoftmax ? 4 : elem;
    owner[i] = out.buffers.size();
    out.buffers.push_back({node.name, i, i, shapes[i].element_count() * size});
  }
  return out;
}

std::vector<std::uint64_t> live_bytes_per_step(const BufferLiveness& liveness) {
  std::vector<std::uint64_t> sums(liveness.steps, 0);
  for (const auto& b : liveness.buffers) {
    if (b.producer > b.last_consumer || b.last_consumer >= liveness.steps) {
      fail(ErrorCode::kInvalidArgument, "buffer '" + b.name + "' has an invalid interval");
    }
    for (std::size_t s = b.producer; s <= b.last_consumer; ++s) sums[s] += b.bytes;
  }
  return sums;
}

std::uint64_t peak_activation_bytes(const BufferLiveness& liveness) {
  const auto sums = live_bytes_per_step(liveness);
  return sums.empty() ? 0 : *std::max_element(sums.begin(), sums.end());
}

PlanRequest plan_request(const Graph& graph, const ShapeMap& shapes,
                         Precision precision, const LivenessOptions& options) {
  PlanRequest req;
  const BufferLiveness live = liveness(graph, shapes, precision, options);
  req.activation_peak_bytes = peak_activation_bytes(live);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto tensors = param_tensors(graph, shapes, i);
    std::uint64_t step_bytes = 0;
    for (const auto& b : live.buffers) {
      if (b.producer == i) step_bytes += b.bytes;
    }
    for (std::size_t p : graph.nodes[i].inputs) {
      step_bytes += shapes[p].element_count() * (precision == Precision::kInt8 ? 1 : 4);
    }
    req.layer_working_sets.push_back({graph.nodes[i].name, step_bytes});
    for (const auto& t : tensors) {
      std::uint64_t bytes = t.shape.element_count();
      if (precision == Precision::kFloat32 || t.is_bias) bytes *= 4;
      if (precision == Precision::kInt8) bytes += kQuantParamBytesPerTensor;
      req.weights.push_back({graph.nodes[i].name + "/" + t.name, bytes});
    }
  }
  return req;
}

int utilization_percent(std::uint64_t used, std::uint64_t available) {
  if (available == 0) return used == 0 ? 0 : 100;
  const unsigned __int128 num = static_cast<unsigned __int128>(used) * 100;
  const std::uint64_t q = static_cast<std::uint64_t>(num / available);
  const unsigned __int128 rem2 = (num % available) * 2;
  if (rem2 > available || (rem2 == available && (q & 1))) return static_cast<int>(q + 1);
  return static_cast<int>(q);
}

std::string format_kb(std::uint64_t bytes) {
  // Round to tenths of a KB, ties away from zero.
  const std::uint64_t tenths = (bytes + 50) / 100;
  std::string s = std::to_string(tenths / 10);
  if (tenths % 10 != 0) s += "." + std::to_string(tenths % 10);
  return s;
}

std::string LevelUsage::cell() const {
  return format_kb(used_bytes()) + " (" + std::to_string(utilization_percent) + "%)";
}

MemoryPlan plan(const PlanRequest& request, const HardwareProfile& profile) {
  profile.validate();
  MemoryPlan out;
  out.profile = profile.name;
  out.activation_peak_bytes = request.activation_peak_bytes;
  const std::size_t levels = profile.levels.size();
  for (const auto& l : profile.levels) {
    LevelUsage u;
    u.label = l.label;
    u.available_bytes = l.available_bytes;
    out.levels.push_back(u);
  }
  std::size_t act = levels;
  for (std::size_t i = 0; i < levels; ++i) {
    if (request.activation_peak_bytes <= profile.levels[i].available_bytes) {
      act = i;
      break;
    }
  }
  if (act == levels) {
    fail(ErrorCode::kDoesNotFit,
         "activation peak of " + format_kb(request.activation_peak_bytes) +
             " KB exceeds every memory level of profile '" + profile.name + "'");
  }
  out.activation_level = act;
  out.levels[act].activation_bytes = request.activation_peak_bytes;
  if (act > 0) {
    out.warnings.push_back("activation peak " + format_kb(request.activation_peak_bytes) +
                           " KB exceeds " + profile.levels[0].label + " (" +
                           format_kb(profile.levels[0].available_bytes) + " KB); placed in " +
                           profile.levels[act].label);
    for (const auto& ws : request.layer_working_sets) {
      if (ws.bytes > profile.levels[0].available_bytes) {
        out.warnings.push_back("layer '" + ws.name + "' working set " + format_kb(ws.bytes) +
                               " KB alone exceeds " + profile.levels[0].label);
      }
    }
  }
  const std::size_t first_weight_level = std::min(act + 1, levels - 1);
  for (const auto& w : request.weights) {
    std::size_t chosen = levels;
    for (std::size_t i = first_weight_level; i < levels; ++i) {
      if (out.levels[i].used_bytes() + w.bytes <= profile.levels[i].available_bytes) {
        chosen = i;
        break;
      }
    }
    if (chosen == levels) {
      fail(ErrorCode::kDoesNotFit, "weight tensor '" + w.name + "' (" + format_kb(w.bytes) +
                                       " KB) does not fit in any memory level of profile '" +
                                       profile.name + "'");
    }
    out.levels[chosen].weight_bytes += w.bytes;
    out.weights.push_back({w.name, w.bytes, chosen});
  }
  for (auto& u : out.levels) {
    u.utilization_percent = utilization_percent(u.used_bytes(), u.available_bytes);
  }
  out.fits_on_chip = levels > 1 && out.levels.back().used_bytes() == 0;
  return out;
}

nlohmann::json MemoryPlan::to_json() const {
  nlohmann::json lv = nlohmann::json::array();
  for (const auto& u : levels) {
    lv.push_back({{"label", u.label},
                  {"available_bytes", u.available_bytes},
                  {"activation_bytes", u.activation_bytes},
                  {"weight_bytes", u.weight_bytes},
                  {"used_bytes", u.used_bytes()},
                  {"utilization_percent", u.utilization_percent},
                  {"cell", u.cell()}});
  }
  nlohmann::json w = nlohmann::json::array();
  for (const auto& p : weights) {
    w.push_back({{"name", p.name}, {"bytes", p.bytes}, {"level", levels[p.level].label}});
  }
  return {{"profile", profile},
          {"activation_peak_bytes", activation_peak_bytes},
          {"activation_level", levels[activation_level].label},
          {"levels", lv},
          {"weights", w},
          {"fits_on_chip", fits_on_chip},
          {"warnings", warnings}};
}

std::string MemoryPlan::table() const {
  std::ostringstream os;
  os << "Memory plan (" << profile << ")\n";
  os << "  level   available KB   utilization KB\n";
  for (const auto& u : levels) {
    std::string label = u.label;
    label.resize(std::max<std::size_t>(label.size(), 7), ' ');
    std::string avail = format_kb(u.available_bytes);
    avail.insert(0, avail.size() < 12 ? 12 - avail.size() : 0, ' ');
    os << "  " << label << " " << avail << "   " << u.cell() << "\n";
  }
  os << "  verdict: " << (fits_on_chip ? "fit on-chip" : "not on-chip") << "\n";
  for (const auto& w : warnings) os << "  warning: " << w << "\n";
  return os.str();
}

LatencyEstimate latency_estimate(std::uint64_t ops, const HardwareProfile& profile,
                                 const MemoryPlan& plan) {
  profile.validate();
  LatencyEstimate est;
  for (std::size_t i = 0; i < plan.levels.size() && i < profile.levels.size(); ++i) {
    if (plan.levels[i].used_bytes() > 0) {
      est.penalty = std::max(est.penalty, profile.levels[i].latency_penalty);
    }
  }
  const double ops_per_second = static_cast<double>(profile.cores) *
                                profile.frequency_mhz * 1e6 *
                                static_cast<double>(profile.macs_per_cycle) * 2.0;
  est.milliseconds = static_cast<double>(ops) / ops_per_second * 1e3 * est.penalty;
  return est;
}

}  // namespace tinyfuse
