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

#ifndef TINYFUSE_CONTAINER_HPP_
#define TINYFUSE_CONTAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "tinyfuse/model.hpp"
#include "tinyfuse/quant.hpp"

namespace tinyfuse {

// File layout (all integers little-endian):
//   [0, 8)    magic "TFUSEMDL"
//   [8, 12)   u32 format version
//   [12, 16)  u32 reserved, zero
//   [16, 24)  u64 header length H
//   [24, 24+H) compact JSON header
//   zero padding to a multiple of 64, then the tensor blobs, each starting
//   at a 64-byte aligned offset relative to the blob region.
inline constexpr std::string_view kContainerMagic = "TFUSEMDL";
inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kBlobAlignment = 64;
inline constexpr std::size_t kContainerPreambleBytes = 24;

using AnyModel = std::variant<FloatModel, QuantizedModel>;

std::string serialize_model(const FloatModel& model);
std::string serialize_model(const QuantizedModel& model);
AnyModel deserialize_model(std::string_view bytes);

void save_model(const FloatModel& model, const std::filesystem::path& path);
void save_model(const QuantizedModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);
// Loads and requires the given precision.
FloatModel load_float_model(const std::filesystem::path& path);
QuantizedModel load_quantized_model(const std::filesystem::path& path);

struct ContainerInfo {
  std::string precision;
  std::uint64_t file_bytes = 0;
  std::uint64_t header_bytes = 0;
  std::uint64_t blob_bytes = 0;    // payload bytes, excluding padding
  std::uint64_t tensor_count = 0;
};
ContainerInfo inspect_container(std::string_view bytes);

}  // namespace tinyfuse

#endif  // TINYFUSE_CONTAINER_HPP_
