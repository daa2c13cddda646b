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

#include "tinyfuse/shape.hpp"

#include <limits>

#include "tinyfuse/error.hpp"

namespace tinyfuse {

TensorShape::TensorShape(std::initializer_list<std::int64_t> dims)
    : dims_(dims) {}

TensorShape::TensorShape(std::vector<std::int64_t> dims)
    : dims_(std::move(dims)) {}

std::uint64_t TensorShape::element_count() const {
  std::uint64_t count = 1;
  for (std::int64_t d : dims_) {
    if (d < 1) {
      fail(ErrorCode::kShapeMismatch,
           "shape " + to_string() + " has a non-positive extent");
    }
    const auto extent = static_cast<std::uint64_t>(d);
    if (count > std::numeric_limits<std::uint64_t>::max() / extent) {
      fail(ErrorCode::kShapeMismatch,
           "element count of " + to_string() + " overflows 64 bits");
    }
    count *= extent;
  }
  return count;
}

std::string TensorShape::to_string() const {
  std::string out = "(";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(dims_[i]);
  }
  return out + ")";
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kInvalidGraph: return "invalid_graph";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kChecksum: return "checksum";
    case ErrorCode::kDoesNotFit: return "does_not_fit";
  }
  return "unknown";
}

}  // namespace tinyfuse
