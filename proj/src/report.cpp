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

#include "tinyfuse/report.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "tinyfuse/checksum.hpp"

namespace tinyfuse {

extern const char* const kRunReportSchemaText;

RunReport::RunReport(std::string command) {
  body_ = {{"schema_version", kReportSchemaVersion},
           {"tool", "tinyfuse"},
           {"command", std::move(command)},
           {"config", nlohmann::json::object()},
           {"seeds", nlohmann::json::object()},
           {"timings_ms", nlohmann::json::object()},
           {"errors", nlohmann::json::array()}};
}

void RunReport::set_seed(const std::string& name, std::uint64_t seed) {
  body_["seeds"][name] = seed;
}

void RunReport::add_timing(const std::string& stage, double milliseconds) {
  body_["timings_ms"][stage] = milliseconds;
}

nlohmann::json& RunReport::add_artifact(const std::string& name,
                                        const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read artifact '" + path.string() + "'");
  const std::string bytes(std::istreambuf_iterator<char>(in), {});
  auto& a = body_["artifacts"][name];
  a = {{"path", path.string()}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes.data(), bytes.size())}};
  return a;
}

void RunReport::add_error(ErrorCode code, const std::string& message) {
  body_["errors"].push_back({{"code", error_code_name(code)}, {"message", message}});
}

bool RunReport::ok() const { return body_.at("errors").empty(); }

nlohmann::json RunReport::to_json() const {
  nlohmann::json j = body_;
  j["status"] = ok() ? "ok" : "error";
  return j;
}

namespace {

std::string percent(const nlohmann::json& v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f%%", 100.0 * v.get<double>());
  return buf;
}

}  // namespace

std::string RunReport::pretty() const {
  std::ostringstream os;
  const auto j = to_json();
  os << "tinyfuse " << j["command"].get<std::string>() << ": " << j["status"].get<std::string>()
     << "\n";
  if (j.contains("accuracies")) {
    os << "\nAccuracy\n";
    const auto& a = j["accuracies"];
    if (a.contains("per_modality")) {
      for (const auto& [name, v] : a["per_modality"].items()) {
        os << "  " << name << " (unimodal)  " << percent(v) << "\n";
      }
    }
    for (const char* key : {"multimodal", "teacher", "distilled", "float", "quantized",
                            "top1_agreement"}) {
      if (a.contains(key)) os << "  " << key << "  " << percent(a[key]) << "\n";
    }
  }
  if (j.contains("model_sizes")) {
    os << "\nModel size\n";
    for (const auto& [k, v] : j["model_sizes"].items()) os << "  " << k << "  " << v << "\n";
  }
  if (j.contains("search")) {
    os << "\nStudent search (budget " << j["search"]["budget_bytes"] << " bytes)\n";
    if (j["search"].contains("table")) os << j["search"]["table"].get<std::string>();
  }
  if (j.contains("fit_report")) {
    os << "\nMemory plan (" << j["fit_report"]["profile"].get<std::string>() << ")\n";
    for (const auto& l : j["fit_report"]["levels"]) {
      os << "  " << l["label"].get<std::string>() << "  " << l["cell"].get<std::string>()
         << "\n";
    }
    os << "  verdict: " << (j["fit_report"]["fits_on_chip"].get<bool>() ? "fit on-chip"
                                                                         : "not on-chip")
       << "\n";
  }
  if (j.contains("latency_estimate")) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", j["latency_estimate"]["milliseconds"].get<double>());
    os << "\nLatency (ESTIMATE): " << buf << " ms\n";
  }
  for (const auto& e : j["errors"]) {
    os << "\nerror [" << e["code"].get<std::string>() << "]: "
       << e["message"].get<std::string>() << "\n";
  }
  return os.str();
}

const nlohmann::json& run_report_schema() {
  static const nlohmann::json schema = nlohmann::json::parse(kRunReportSchemaText);
  return schema;
}

namespace {

bool has_type(const nlohmann::json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "integer") {
    return v.is_number_integer() ||
           (v.is_number_float() && v.get<double>() == static_cast<double>(
                                                          static_cast<long long>(v.get<double>())));
  }
  if (type == "number") return v.is_number();
  return false;
}

void check(const nlohmann::json& root, const nlohmann::json& schema, const nlohmann::json& v,
           const std::string& path, std::vector<std::string>& errors) {
  if (schema.is_boolean()) {
    if (!schema.get<bool>()) errors.push_back(path + ": not allowed");
    return;
  }
  if (schema.contains("$ref")) {
    const std::string ref = schema["$ref"].get<std::string>();
    const std::string prefix = "#/definitions/";
    if (ref.rfind(prefix, 0) != 0 || !root.contains("definitions") ||
        !root["definitions"].contains(ref.substr(prefix.size()))) {
      errors.push_back(path + ": unresolvable reference " + ref);
      return;
    }
    check(root, root["definitions"][ref.substr(prefix.size())], v, path, errors);
  }
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_array()) {
      for (const auto& each : t) ok = ok || has_type(v, each.get<std::string>());
    } else {
      ok = has_type(v, t.get<std::string>());
    }
    if (!ok) {
      errors.push_back(path + ": expected type " + t.dump() + ", got " + v.type_name());
      return;
    }
  }
  if (schema.contains("const") && v != schema["const"]) {
    errors.push_back(path + ": expected " + schema["const"].dump());
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || e == v;
    if (!found) errors.push_back(path + ": " + v.dump() + " not in " + schema["enum"].dump());
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (schema.contains("minimum") && x < schema["minimum"].get<double>()) {
      errors.push_back(path + ": " + v.dump() + " below minimum " + schema["minimum"].dump());
    }
    if (schema.contains("maximum") && x > schema["maximum"].get<double>()) {
      errors.push_back(path + ": " + v.dump() + " above maximum " + schema["maximum"].dump());
    }
  }
  if (v.is_string()) {
    const auto len = v.get<std::string>().size();
    if (schema.contains("minLength") && len < schema["minLength"].get<std::size_t>()) {
      errors.push_back(path + ": string shorter than " + schema["minLength"].dump());
    }
    if (schema.contains("maxLength") && len > schema["maxLength"].get<std::size_t>()) {
      errors.push_back(path + ": string longer than " + schema["maxLength"].dump());
    }
  }
  if (v.is_array()) {
    if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) {
      errors.push_back(path + ": fewer than " + schema["minItems"].dump() + " items");
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        check(root, schema["items"], v[i], path + "/" + std::to_string(i), errors);
      }
    }
  }
  if (v.is_object()) {
    if (schema.contains("required")) {
      for (const auto& r : schema["required"]) {
        if (!v.contains(r.get<std::string>())) {
          errors.push_back(path + ": missing required property '" + r.get<std::string>() + "'");
        }
      }
    }
    const nlohmann::json empty = nlohmann::json::object();
    const auto& props = schema.contains("properties") ? schema["properties"] : empty;
    for (const auto& [key, value] : v.items()) {
      const std::string sub = path + "/" + key;
      if (props.contains(key)) {
        check(root, props[key], value, sub, errors);
      } else if (schema.contains("additionalProperties")) {
        check(root, schema["additionalProperties"], value, sub, errors);
      }
    }
  }
}

}  // namespace

std::vector<std::string> validate_json(const nlohmann::json& schema,
                                       const nlohmann::json& instance) {
  std::vector<std::string> errors;
  check(schema, schema, instance, "", errors);
  return errors;
}

std::vector<std::string> validate_report(const nlohmann::json& report) {
  return validate_json(run_report_schema(), report);
}

}  // namespace tinyfuse
