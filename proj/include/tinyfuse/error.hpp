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

#ifndef TINYFUSE_ERROR_HPP_
#define TINYFUSE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace tinyfuse {

// Error categories. The CLI maps each one to a distinct exit status.
enum class ErrorCode {
  kInvalidArgument,
  kInvalidGraph,
  kShapeMismatch,
  kNumeric,
  kDiverged,
  kIo,
  kFormat,
  kChecksum,
  kDoesNotFit,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace tinyfuse

#endif  // TINYFUSE_ERROR_HPP_
