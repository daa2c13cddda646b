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

#ifndef TINYFUSE_PARALLEL_HPP_
#define TINYFUSE_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace tinyfuse {

// Worker count used when a config asks for 0 (auto): hardware concurrency,
// overridable through TINYFUSE_THREADS.
std::size_t default_thread_count();

// Calls fn(i) once for every i in [0, n). Callers write results by index,
// so output never depends on the thread count.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace tinyfuse

#endif  // TINYFUSE_PARALLEL_HPP_
