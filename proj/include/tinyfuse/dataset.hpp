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

#ifndef TINYFUSE_DATASET_HPP_
#define TINYFUSE_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tinyfuse/shape.hpp"

namespace tinyfuse {

struct ModalitySpec {
  std::string name;
  TensorShape shape;
  int alphabet = 2;  // number of sub-symbols this modality can show
};

// Complementary-modality classification task. A label k is decomposed into
// one sub-symbol per modality (mixed radix, first modality least
// significant); modality m renders only its sub-symbol, as a fixed seeded
// template plus Gaussian noise. Any single modality therefore identifies the
// class only up to the product of the other alphabets.
struct SyntheticTaskSpec {
  std::string name;
  std::vector<ModalitySpec> modalities;
  double noise_stddev = 0.3;
  std::uint64_t template_seed = 1;
  std::int64_t sample_count = 0;

  int num_classes() const;
  void validate() const;
};

SyntheticTaskSpec task_preset(const std::string& name);  // audio3, image2
std::vector<std::string> task_preset_names();

nlohmann::json task_to_json(const SyntheticTaskSpec& spec);
SyntheticTaskSpec task_from_json(const nlohmann::json& j);

// Sub-symbols of a label, one per modality.
std::vector<int> decompose_label(const SyntheticTaskSpec& spec, int label);

enum class Split { kTrain, kValidation, kTest };
const char* split_name(Split split);
Split parse_split(const std::string& name);

struct ModalityData {
  std::string name;
  TensorShape shape;          // per-sample shape
  std::vector<float> values;  // sample-major
};

struct Dataset {
  std::optional<SyntheticTaskSpec> task;
  std::uint64_t seed = 0;
  int num_classes = 0;
  std::vector<ModalityData> modalities;
  std::vector<std::int32_t> labels;
  std::vector<std::size_t> train, validation, test;

  std::size_t size() const { return labels.size(); }
  const std::vector<std::size_t>& split(Split s) const;
  std::optional<std::size_t> modality_index(const std::string& name) const;
  std::span<const float> sample(std::size_t modality, std::size_t index) const;

  // Throws if splits overlap, indices are out of range, or buffers disagree
  // with shapes.
  void validate() const;
  // SHA-256 over labels and modality values.
  std::string fingerprint() const;
};

// Deterministic in (spec, seed). Classes are balanced to within one sample;
// splits are 70/10/20.
Dataset generate(const SyntheticTaskSpec& spec, std::uint64_t seed);

// Writes manifest.json plus one tensor file per modality and a label file
// into dir; returns the manifest path.
std::filesystem::path save_dataset(const Dataset& data,
                                   const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& manifest);

// Tensor file: 16-byte header of four little-endian uint32 extents (sample
// count, then the per-sample shape padded with 1s), then little-endian
// payload.
inline constexpr std::size_t kTensorFileHeaderBytes = 16;

}  // namespace tinyfuse

#endif  // TINYFUSE_DATASET_HPP_
