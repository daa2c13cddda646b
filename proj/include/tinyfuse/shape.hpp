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

#ifndef TINYFUSE_SHAPE_HPP_
#define TINYFUSE_SHAPE_HPP_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace tinyfuse {

// Ordered list of positive extents. Feature maps are (height, width,
// channels), channels-last; vectors are (length).
class TensorShape {
 public:
  TensorShape() = default;
  TensorShape(std::initializer_list<std::int64_t> dims);
  explicit TensorShape(std::vector<std::int64_t> dims);

  const std::vector<std::int64_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::int64_t operator[](std::size_t i) const { return dims_[i]; }

  bool is_vector() const { return dims_.size() == 1; }
  bool is_map() const { return dims_.size() == 3; }
  std::int64_t height() const { return dims_.at(0); }
  std::int64_t width() const { return dims_.at(1); }
  std::int64_t channels() const { return dims_.back(); }

  // Product of extents; throws on 64-bit overflow.
  std::uint64_t element_count() const;

  std::string to_string() const;

  friend bool operator==(const TensorShape&, const TensorShape&) = default;

 private:
  std::vector<std::int64_t> dims_;
};

}  // namespace tinyfuse

#endif  // TINYFUSE_SHAPE_HPP_
