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

#include "tinyfuse/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "tinyfuse/checksum.hpp"
#include "tinyfuse/error.hpp"
#include "tinyfuse/graph_json.hpp"
#include "tinyfuse/random.hpp"

namespace tinyfuse {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor files are written from little-endian memory images");

constexpr int kDatasetFormatVersion = 1;
constexpr int kBlobsPerTemplate = 3;

// Sum of Gaussian blobs; one template per (modality, sub-symbol).
std::vector<float> render_template(const ModalitySpec& m, int symbol,
                                   std::uint64_t template_seed) {
  Rng rng(derive_seed(template_seed, m.name + "/" + std::to_string(symbol)));
  const TensorShape& s = m.shape;
  std::vector<float> out(s.element_count(), 0.0f);
  const std::int64_t h = s.is_map() ? s.height() : 1;
  const std::int64_t w = s.is_map() ? s.width() : s[0];
  const std::int64_t c = s.is_map() ? s.channels() : 1;
  const double extent = static_cast<double>(std::max(h, w));
  for (int b = 0; b < kBlobsPerTemplate; ++b) {
    const double cy = rng.uniform(0.15, 0.85) * h;
    const double cx = rng.uniform(0.15, 0.85) * w;
    const double radius = rng.uniform(0.08, 0.2) * extent;
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    std::vector<double> amplitude(c);
    for (auto& a : amplitude) a = sign * rng.uniform(0.6, 1.2);
    for (std::int64_t y = 0; y < h; ++y) {
      for (std::int64_t x = 0; x < w; ++x) {
        const double dy = (y + 0.5 - (h == 1 ? y + 0.5 : cy)) / radius;
        const double dx = (x + 0.5 - cx) / radius;
        const double v = std::exp(-0.5 * (dy * dy + dx * dx));
        for (std::int64_t ch = 0; ch < c; ++ch) {
          out[(y * w + x) * c + ch] += static_cast<float>(amplitude[ch] * v);
        }
      }
    }
  }
  return out;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(const unsigned char* b) {
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

std::array<std::uint32_t, 4> header_dims(std::size_t count, const TensorShape& shape) {
  if (shape.rank() > 3) {
    fail(ErrorCode::kFormat, "tensor files hold at most rank-3 samples");
  }
  std::array<std::uint32_t, 4> dims = {static_cast<std::uint32_t>(count), 1, 1, 1};
  for (std::size_t i = 0; i < shape.rank(); ++i) {
    dims[1 + i] = static_cast<std::uint32_t>(shape[i]);
  }
  return dims;
}

template <typename T>
std::string write_tensor_file(const std::filesystem::path& path, std::size_t count,
                              const TensorShape& shape, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  for (std::uint32_t d : header_dims(count, shape)) write_u32(out, d);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!out) fail(ErrorCode::kIo, "write to '" + path.string() + "' failed");
  out.close();
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  return sha256_hex(bytes.data(), bytes.size());
}

template <typename T>
std::vector<T> read_tensor_file(const std::filesystem::path& path, std::size_t count,
                                const TensorShape& shape, const std::string& sha256) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open tensor file '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  const std::size_t elements = count * shape.element_count();
  if (bytes.size() != kTensorFileHeaderBytes + elements * sizeof(T)) {
    fail(ErrorCode::kFormat, "tensor file '" + path.string() + "' has " +
                                 std::to_string(bytes.size()) + " bytes, expected " +
                                 std::to_string(kTensorFileHeaderBytes +
                                                elements * sizeof(T)) +
                                 " (truncated or wrong shape)");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto expected = header_dims(count, shape);
  for (int i = 0; i < 4; ++i) {
    if (read_u32(raw + 4 * i) != expected[i]) {
      fail(ErrorCode::kFormat,
           "tensor file '" + path.string() + "' header disagrees with the manifest");
    }
  }
  if (sha256_hex(bytes.data(), bytes.size()) != sha256) {
    fail(ErrorCode::kChecksum, "checksum mismatch for '" + path.string() + "'");
  }
  std::vector<T> values(elements);
  std::memcpy(values.data(), raw + kTensorFileHeaderBytes, elements * sizeof(T));
  return values;
}

}  // namespace

int SyntheticTaskSpec::num_classes() const {
  int k = 1;
  for (const auto& m : modalities) k *= m.alphabet;
  return k;
}

void SyntheticTaskSpec::validate() const {
  if (modalities.empty()) {
    fail(ErrorCode::kInvalidArgument, "task '" + name + "' has no modalities");
  }
  for (const auto& m : modalities) {
    if (m.alphabet < 1) {
      fail(ErrorCode::kInvalidArgument, "modality '" + m.name + "' alphabet must be >= 1");
    }
    if (!m.shape.is_map() && !m.shape.is_vector()) {
      fail(ErrorCode::kInvalidArgument,
           "modality '" + m.name + "' shape must be a vector or HxWxC map");
    }
    m.shape.element_count();
  }
  if (num_classes() < 2) {
    fail(ErrorCode::kInvalidArgument, "task '" + name + "' needs at least 2 classes");
  }
  if (!(noise_stddev >= 0.0) || !std::isfinite(noise_stddev)) {
    fail(ErrorCode::kInvalidArgument, "noise standard deviation must be >= 0");
  }
  if (sample_count < num_classes()) {
    fail(ErrorCode::kInvalidArgument,
         "sample count " + std::to_string(sample_count) + " is below the class count " +
             std::to_string(num_classes()));
  }
}

std::vector<std::string> task_preset_names() { return {"audio3", "image2"}; }

SyntheticTaskSpec task_preset(const std::string& name) {
  SyntheticTaskSpec spec;
  spec.name = name;
  spec.noise_stddev = 0.3;
  spec.template_seed = 20240;
  if (name == "audio3") {
    for (const char* m : {"cough", "speech", "breath"}) {
      spec.modalities.push_back({m, TensorShape{32, 32, 1}, 2});
    }
    spec.sample_count = 6000;
  } else if (name == "image2") {
    for (const char* m : {"depth", "thermal"}) {
      spec.modalities.push_back({m, TensorShape{64, 64, 1}, 4});
    }
    spec.sample_count = 3200;
  } else {
    fail(ErrorCode::kInvalidArgument,
         "unknown preset '" + name + "' (expected audio3 or image2)");
  }
  return spec;
}

nlohmann::json task_to_json(const SyntheticTaskSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["noise_stddev"] = spec.noise_stddev;
  j["template_seed"] = spec.template_seed;
  j["sample_count"] = spec.sample_count;
  j["modalities"] = nlohmann::json::array();
  for (const auto& m : spec.modalities) {
    j["modalities"].push_back(
        {{"name", m.name}, {"shape", m.shape.dims()}, {"alphabet", m.alphabet}});
  }
  return j;
}

SyntheticTaskSpec task_from_json(const nlohmann::json& j) {
  SyntheticTaskSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.noise_stddev = j.at("noise_stddev").get<double>();
    spec.template_seed = j.at("template_seed").get<std::uint64_t>();
    spec.sample_count = j.at("sample_count").get<std::int64_t>();
    for (const auto& m : j.at("modalities")) {
      spec.modalities.push_back(
          {m.at("name").get<std::string>(),
           TensorShape(m.at("shape").get<std::vector<std::int64_t>>()),
           m.at("alphabet").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, std::string("task spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::vector<int> decompose_label(const SyntheticTaskSpec& spec, int label) {
  std::vector<int> digits;
  for (const auto& m : spec.modalities) {
    digits.push_back(label % m.alphabet);
    label /= m.alphabet;
  }
  return digits;
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation" || name == "val") return Split::kValidation;
  if (name == "test") return Split::kTest;
  fail(ErrorCode::kInvalidArgument, "unknown split '" + name + "'");
}

const std::vector<std::size_t>& Dataset::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kValidation: return validation;
    case Split::kTest: return test;
  }
  return test;
}

std::optional<std::size_t> Dataset::modality_index(const std::string& name) const {
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    if (modalities[i].name == name) return i;
  }
  return std::nullopt;
}

std::span<const float> Dataset::sample(std::size_t modality, std::size_t index) const {
  const ModalityData& m = modalities[modality];
  const std::size_t n = m.shape.element_count();
  return std::span<const float>(m.values).subspan(index * n, n);
}

void Dataset::validate() const {
  if (num_classes < 2) fail(ErrorCode::kFormat, "dataset needs at least 2 classes");
  for (const auto& m : modalities) {
    if (m.values.size() != size() * m.shape.element_count()) {
      fail(ErrorCode::kFormat, "modality '" + m.name + "' buffer size mismatch");
    }
  }
  for (std::int32_t y : labels) {
    if (y < 0 || y >= num_classes) {
      fail(ErrorCode::kFormat, "label " + std::to_string(y) + " out of range");
    }
  }
  std::vector<char> seen(size(), 0);
  for (const auto* part : {&train, &validation, &test}) {
    for (std::size_t i : *part) {
      if (i >= size()) {
        fail(ErrorCode::kFormat, "split index " + std::to_string(i) + " out of range");
      }
      if (seen[i]++) {
        fail(ErrorCode::kFormat,
             "splits overlap at sample " + std::to_string(i));
      }
    }
  }
}

std::string Dataset::fingerprint() const {
  Sha256 h;
  h.update(std::span<const std::int32_t>(labels));
  for (const auto& m : modalities) h.update(std::span<const float>(m.values));
  return h.hex_digest();
}

Dataset generate(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int k = spec.num_classes();
  const auto n = static_cast<std::size_t>(spec.sample_count);

  std::vector<std::vector<std::vector<float>>> templates(spec.modalities.size());
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    for (int v = 0; v < spec.modalities[m].alphabet; ++v) {
      templates[m].push_back(render_template(spec.modalities[m], v, spec.template_seed));
    }
  }

  Dataset data;
  data.task = spec;
  data.seed = seed;
  data.num_classes = k;
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.labels[i] = static_cast<std::int32_t>(i % k);
  Rng label_rng(derive_seed(seed, "labels"));
  label_rng.shuffle(data.labels);

  Rng noise(derive_seed(seed, "noise"));
  for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
    const ModalitySpec& ms = spec.modalities[m];
    ModalityData md{ms.name, ms.shape, {}};
    const std::size_t elems = ms.shape.element_count();
    md.values.resize(n * elems);
    for (std::size_t i = 0; i < n; ++i) {
      const int symbol = decompose_label(spec, data.labels[i])[m];
      const auto& t = templates[m][symbol];
      float* dst = md.values.data() + i * elems;
      for (std::size_t e = 0; e < elems; ++e) {
        dst[e] = t[e] + static_cast<float>(spec.noise_stddev * noise.normal());
      }
    }
    data.modalities.push_back(std::move(md));
  }

  // Labels are already in random order, so contiguous ranges are random splits.
  const std::size_t n_train = n * 7 / 10;
  const std::size_t n_val = n / 10;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) data.train.push_back(i);
    else if (i < n_train + n_val) data.validation.push_back(i);
    else data.test.push_back(i);
  }
  return data;
}

std::filesystem::path save_dataset(const Dataset& data,
                                   const std::filesystem::path& dir) {
  data.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["format"] = "tinyfuse-dataset";
  j["version"] = kDatasetFormatVersion;
  if (data.task) j["task"] = task_to_json(*data.task);
  j["seed"] = data.seed;
  j["num_classes"] = data.num_classes;
  j["sample_count"] = data.size();
  j["modalities"] = nlohmann::json::array();
  for (const auto& m : data.modalities) {
    const std::string file = m.name + ".f32";
    const std::string sha = write_tensor_file(dir / file, data.size(), m.shape, m.values);
    j["modalities"].push_back(
        {{"name", m.name}, {"shape", m.shape.dims()}, {"file", file}, {"sha256", sha}});
  }
  const std::string sha = write_tensor_file(dir / "labels.i32", data.size(),
                                            TensorShape{1}, data.labels);
  j["labels"] = {{"file", "labels.i32"}, {"sha256", sha}};
  j["split_sizes"] = {{"train", data.train.size()},
                      {"validation", data.validation.size()},
                      {"test", data.test.size()}};
  j["splits"] = {{"train", data.train},
                 {"validation", data.validation},
                 {"test", data.test}};
  j["fingerprint"] = data.fingerprint();
  const auto manifest = dir / "manifest.json";
  write_text_file(manifest, j.dump(1) + "\n");
  return manifest;
}

Dataset load_dataset(const std::filesystem::path& manifest) {
  const nlohmann::json j = read_json_file(manifest);
  const auto dir = manifest.parent_path();
  Dataset data;
  try {
    if (j.at("format") != "tinyfuse-dataset" || j.at("version") != kDatasetFormatVersion) {
      fail(ErrorCode::kFormat, "'" + manifest.string() + "' is not a version " +
                                   std::to_string(kDatasetFormatVersion) +
                                   " dataset manifest");
    }
    if (j.contains("task")) data.task = task_from_json(j.at("task"));
    data.seed = j.at("seed").get<std::uint64_t>();
    data.num_classes = j.at("num_classes").get<int>();
    const auto n = j.at("sample_count").get<std::size_t>();
    for (const auto& m : j.at("modalities")) {
      ModalityData md;
      md.name = m.at("name").get<std::string>();
      md.shape = TensorShape(m.at("shape").get<std::vector<std::int64_t>>());
      md.values = read_tensor_file<float>(dir / m.at("file").get<std::string>(), n,
                                          md.shape, m.at("sha256").get<std::string>());
      data.modalities.push_back(std::move(md));
    }
    data.labels = read_tensor_file<std::int32_t>(
        dir / j.at("labels").at("file").get<std::string>(), n, TensorShape{1},
        j.at("labels").at("sha256").get<std::string>());
    data.train = j.at("splits").at("train").get<std::vector<std::size_t>>();
    data.validation = j.at("splits").at("validation").get<std::vector<std::size_t>>();
    data.test = j.at("splits").at("test").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "manifest '" + manifest.string() + "': " + e.what());
  }
  data.validate();
  return data;
}

}  // namespace tinyfuse
