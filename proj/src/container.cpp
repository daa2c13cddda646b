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

#include "tinyfuse/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "tinyfuse/error.hpp"
#include "tinyfuse/graph_json.hpp"

namespace tinyfuse {
namespace {

static_assert(std::endian::native == std::endian::little,
              "the container reader assumes a little-endian host");

using nlohmann::json;

std::size_t align_up(std::size_t n) {
  return (n + kBlobAlignment - 1) / kBlobAlignment * kBlobAlignment;
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

struct Blob {
  json entry;
  const void* data = nullptr;
  std::size_t nbytes = 0;
};

std::string assemble(json header, std::vector<Blob>& blobs) {
  std::size_t offset = 0;
  json tensors = json::array();
  for (auto& b : blobs) {
    offset = align_up(offset);
    b.entry["offset"] = offset;
    b.entry["nbytes"] = b.nbytes;
    tensors.push_back(b.entry);
    offset += b.nbytes;
  }
  header["tensors"] = tensors;
  const std::string text = header.dump();
  std::string out;
  out.append(kContainerMagic);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, text.size());
  out += text;
  out.resize(align_up(out.size()), '\0');
  const std::size_t base = out.size();
  for (const auto& b : blobs) {
    out.resize(base + b.entry["offset"].get<std::size_t>(), '\0');
    out.append(static_cast<const char*>(b.data), b.nbytes);
  }
  return out;
}

json shape_json(const TensorShape& s) { return s.dims(); }

json multiplier_json(const Multiplier& m) {
  return {{"m0", m.m0}, {"shift", m.shift}, {"real", m.real}};
}

Multiplier multiplier_from_json(const json& j) {
  Multiplier m;
  m.m0 = j.at("m0").get<std::int32_t>();
  m.shift = j.at("shift").get<int>();
  m.real = j.at("real").get<double>();
  return m;
}

struct Parsed {
  json header;
  std::string_view blobs;
};

Parsed parse(std::string_view bytes) {
  if (bytes.size() < kContainerPreambleBytes ||
      bytes.substr(0, kContainerMagic.size()) != kContainerMagic) {
    fail(ErrorCode::kFormat, "not a tinyfuse model container (bad magic)");
  }
  const auto version = get<std::uint32_t>(bytes, 8);
  if (version != kContainerVersion) {
    fail(ErrorCode::kFormat, "unsupported container version " + std::to_string(version) +
                                 " (supported: " + std::to_string(kContainerVersion) + ")");
  }
  const auto header_len = get<std::uint64_t>(bytes, 16);
  if (header_len > bytes.size() - kContainerPreambleBytes) {
    fail(ErrorCode::kFormat, "container header extends past end of file");
  }
  Parsed p;
  try {
    p.header = json::parse(bytes.substr(kContainerPreambleBytes, header_len));
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("container header is not valid JSON: ") + e.what());
  }
  const std::size_t base = align_up(kContainerPreambleBytes + header_len);
  p.blobs = base <= bytes.size() ? bytes.substr(base) : std::string_view{};
  return p;
}

std::string_view blob_of(const Parsed& p, const json& entry, std::size_t expected) {
  const auto offset = entry.at("offset").get<std::uint64_t>();
  const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
  const std::string where =
      entry.at("node").get<std::string>() + "/" + entry.at("name").get<std::string>();
  if (nbytes != expected) {
    fail(ErrorCode::kFormat, "tensor '" + where + "' declares " + std::to_string(nbytes) +
                                 " bytes but its shape needs " + std::to_string(expected));
  }
  if (offset % kBlobAlignment != 0 || offset > p.blobs.size() ||
      nbytes > p.blobs.size() - offset) {
    fail(ErrorCode::kFormat, "tensor '" + where + "' blob length mismatch (file truncated?)");
  }
  return p.blobs.substr(offset, nbytes);
}

void check_blob_tail(const Parsed& p, const json& tensors) {
  std::uint64_t end = 0;
  for (const auto& t : tensors) {
    end = t.at("offset").get<std::uint64_t>() + t.at("nbytes").get<std::uint64_t>();
  }
  if (end != p.blobs.size()) {
    fail(ErrorCode::kFormat, "blob length mismatch: header describes " + std::to_string(end) +
                                 " bytes, file holds " + std::to_string(p.blobs.size()));
  }
}

FloatModel float_from(const Parsed& p) {
  FloatModel m;
  m.graph = graph_from_json(p.header.at("graph"));
  m.shapes = infer_shapes(m.graph);
  m.metadata = p.header.at("metadata");
  m.params.resize(m.graph.nodes.size());
  const json& tensors = p.header.at("tensors");
  std::size_t k = 0;
  for (std::size_t n = 0; n < m.graph.nodes.size(); ++n) {
    for (const auto& info : param_tensors(m.graph, m.shapes, n)) {
      if (k >= tensors.size()) fail(ErrorCode::kFormat, "container lists too few tensors");
      const json& e = tensors[k++];
      if (e.at("node") != m.graph.nodes[n].name || e.at("name") != info.name ||
          e.at("dtype") != "float32" || e.at("shape") != shape_json(info.shape)) {
        fail(ErrorCode::kFormat, "container tensor list does not match the graph at '" +
                                     m.graph.nodes[n].name + "/" + info.name + "'");
      }
      FloatTensor t(info.shape);
      const auto blob = blob_of(p, e, t.size() * sizeof(float));
      std::memcpy(t.data.data(), blob.data(), blob.size());
      m.params[n].push_back(std::move(t));
    }
  }
  if (k != tensors.size()) fail(ErrorCode::kFormat, "container lists extra tensors");
  check_blob_tail(p, tensors);
  validate_model(m);
  return m;
}

QuantizedModel quant_from(const Parsed& p) {
  QuantizedModel m;
  m.graph = graph_from_json(p.header.at("graph"));
  m.shapes = infer_shapes(m.graph);
  m.metadata = p.header.at("metadata");
  const std::size_t n = m.graph.nodes.size();
  m.activations.resize(n);
  m.depthwise.resize(n);
  m.params.resize(n);
  m.multipliers.resize(n);
  const json& nodes = p.header.at("nodes");
  if (nodes.size() != n) fail(ErrorCode::kFormat, "container node table has the wrong length");
  for (std::size_t i = 0; i < n; ++i) {
    const json& e = nodes[i];
    if (e.at("name") != m.graph.nodes[i].name) {
      fail(ErrorCode::kFormat, "container node table is out of order");
    }
    m.activations[i] = qparams_from_json(e.at("output"));
    if (e.contains("depthwise")) m.depthwise[i] = qparams_from_json(e.at("depthwise"));
    for (const auto& mj : e.at("multipliers")) m.multipliers[i].push_back(multiplier_from_json(mj));
  }
  const json& tensors = p.header.at("tensors");
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& info : param_tensors(m.graph, m.shapes, i)) {
      if (k >= tensors.size()) fail(ErrorCode::kFormat, "container lists too few tensors");
      const json& e = tensors[k++];
      const char* dtype = info.is_bias ? "int32" : "int8";
      if (e.at("node") != m.graph.nodes[i].name || e.at("name") != info.name ||
          e.at("dtype") != dtype || e.at("shape") != shape_json(info.shape)) {
        fail(ErrorCode::kFormat, "container tensor list does not match the graph at '" +
                                     m.graph.nodes[i].name + "/" + info.name + "'");
      }
      QuantTensor q;
      q.name = info.name;
      q.shape = info.shape;
      q.is_bias = info.is_bias;
      q.qp = qparams_from_json(e.at("qparams"));
      const std::size_t count = info.shape.element_count();
      if (info.is_bias) {
        q.q32.resize(count);
        const auto blob = blob_of(p, e, count * 4);
        std::memcpy(q.q32.data(), blob.data(), blob.size());
      } else {
        q.q8.resize(count);
        const auto blob = blob_of(p, e, count);
        std::memcpy(q.q8.data(), blob.data(), blob.size());
      }
      m.params[i].push_back(std::move(q));
    }
  }
  if (k != tensors.size()) fail(ErrorCode::kFormat, "container lists extra tensors");
  check_blob_tail(p, tensors);
  m.validate();
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open model file '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "cannot write model file '" + path.string() + "'");
}

}  // namespace

std::string serialize_model(const FloatModel& model) {
  validate_model(model);
  json header = {{"precision", "float32"},
                 {"graph", graph_to_json(model.graph)},
                 {"metadata", model.metadata}};
  std::vector<Blob> blobs;
  for (std::size_t n = 0; n < model.graph.nodes.size(); ++n) {
    const auto infos = param_tensors(model.graph, model.shapes, n);
    for (std::size_t t = 0; t < infos.size(); ++t) {
      const auto& tensor = model.params[n][t];
      blobs.push_back({{{"node", model.graph.nodes[n].name},
                        {"name", infos[t].name},
                        {"dtype", "float32"},
                        {"shape", shape_json(infos[t].shape)}},
                       tensor.data.data(),
                       tensor.size() * sizeof(float)});
    }
  }
  return assemble(std::move(header), blobs);
}

std::string serialize_model(const QuantizedModel& model) {
  model.validate();
  json nodes = json::array();
  for (std::size_t i = 0; i < model.graph.nodes.size(); ++i) {
    json e = {{"name", model.graph.nodes[i].name},
              {"output", qparams_to_json(model.activations[i])}};
    if (model.depthwise[i]) e["depthwise"] = qparams_to_json(*model.depthwise[i]);
    json ms = json::array();
    for (const auto& m : model.multipliers[i]) ms.push_back(multiplier_json(m));
    e["multipliers"] = ms;
    nodes.push_back(e);
  }
  json header = {{"precision", "int8"},
                 {"graph", graph_to_json(model.graph)},
                 {"metadata", model.metadata},
                 {"nodes", nodes}};
  std::vector<Blob> blobs;
  for (std::size_t n = 0; n < model.graph.nodes.size(); ++n) {
    for (const auto& t : model.params[n]) {
      Blob b{{{"node", model.graph.nodes[n].name},
              {"name", t.name},
              {"dtype", t.is_bias ? "int32" : "int8"},
              {"shape", shape_json(t.shape)},
              {"qparams", qparams_to_json(t.qp)}},
             nullptr,
             0};
      if (t.is_bias) {
        b.data = t.q32.data();
        b.nbytes = t.q32.size() * 4;
      } else {
        b.data = t.q8.data();
        b.nbytes = t.q8.size();
      }
      blobs.push_back(std::move(b));
    }
  }
  return assemble(std::move(header), blobs);
}

AnyModel deserialize_model(std::string_view bytes) {
  const Parsed p = parse(bytes);
  try {
    const std::string precision = p.header.at("precision").get<std::string>();
    if (precision == "float32") return float_from(p);
    if (precision == "int8") return quant_from(p);
    fail(ErrorCode::kFormat, "unknown container precision '" + precision + "'");
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed container header: ") + e.what());
  }
}

void save_model(const FloatModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

void save_model(const QuantizedModel& model, const std::filesystem::path& path) {
  write_file(path, serialize_model(model));
}

AnyModel load_model(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return deserialize_model(bytes);
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

FloatModel load_float_model(const std::filesystem::path& path) {
  AnyModel m = load_model(path);
  if (auto* f = std::get_if<FloatModel>(&m)) return std::move(*f);
  fail(ErrorCode::kFormat, path.string() + " holds an int8 model, expected float32");
}

QuantizedModel load_quantized_model(const std::filesystem::path& path) {
  AnyModel m = load_model(path);
  if (auto* q = std::get_if<QuantizedModel>(&m)) return std::move(*q);
  fail(ErrorCode::kFormat, path.string() + " holds a float32 model, expected int8");
}

ContainerInfo inspect_container(std::string_view bytes) {
  const Parsed p = parse(bytes);
  ContainerInfo info;
  info.precision = p.header.value("precision", "");
  info.file_bytes = bytes.size();
  info.header_bytes = get<std::uint64_t>(bytes, 16);
  for (const auto& t : p.header.at("tensors")) {
    info.blob_bytes += t.at("nbytes").get<std::uint64_t>();
    ++info.tensor_count;
  }
  return info;
}

}  // namespace tinyfuse
