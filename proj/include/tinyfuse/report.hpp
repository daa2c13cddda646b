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

#ifndef TINYFUSE_REPORT_HPP_
#define TINYFUSE_REPORT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tinyfuse/error.hpp"

namespace tinyfuse {

inline constexpr int kReportSchemaVersion = 1;

// Structured record of one CLI command. Sections of stages that did not run
// are left out rather than set to null.
class RunReport {
 public:
  explicit RunReport(std::string command);

  nlohmann::json& operator[](const std::string& key) { return body_[key]; }
  const nlohmann::json& body() const { return body_; }

  void set_seed(const std::string& name, std::uint64_t seed);
  void add_timing(const std::string& stage, double milliseconds);
  // Records path, byte count and SHA-256 of a written file.
  nlohmann::json& add_artifact(const std::string& name, const std::filesystem::path& path);
  void add_error(ErrorCode code, const std::string& message);

  bool ok() const;
  nlohmann::json to_json() const;
  // Human-readable tables for the sections present.
  std::string pretty() const;

 private:
  nlohmann::json body_;
};

// The published run-report schema (schemas/run_report.schema.json).
const nlohmann::json& run_report_schema();

// Validates instance against a JSON Schema using the keywords type, enum,
// const, properties, required, additionalProperties, items, minItems,
// minimum, maximum, minLength, maxLength and local "$ref"s into
// definitions. Returns one message per violation, empty when valid.
std::vector<std::string> validate_json(const nlohmann::json& schema,
                                       const nlohmann::json& instance);

std::vector<std::string> validate_report(const nlohmann::json& report);

}  // namespace tinyfuse

#endif  // TINYFUSE_REPORT_HPP_
