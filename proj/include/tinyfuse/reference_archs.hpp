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

#ifndef TINYFUSE_REFERENCE_ARCHS_HPP_
#define TINYFUSE_REFERENCE_ARCHS_HPP_

#include <string>
#include <vector>

#include "tinyfuse/dataset.hpp"
#include "tinyfuse/graph.hpp"
#include "tinyfuse/search_space.hpp"

namespace tinyfuse {

// Teacher for a task: one convolutional encoder per modality (three
// Conv-ReLU-MaxPool stages for 32x32 maps, four for 64x64), intermediate
// fusion by concatenation, then Dense-ReLU-Dense-Softmax.
Graph reference_teacher(const SyntheticTaskSpec& task);

// Student template: the same topology with narrower encoders whose second
// and later convolutions belong to a separable-substitution axis.
Graph reference_student(const SyntheticTaskSpec& task);

// Five candidates: shared encoder width in {32, 24, 16, 8, 4}, 32 hidden
// units, separable later convolutions.
ArchSearchSpace reference_search_space(const SyntheticTaskSpec& task);

// Encoder nodes of the reference graphs are prefixed with the modality name.
Graph unimodal_variant(const Graph& graph, const std::string& modality);

}  // namespace tinyfuse

#endif  // TINYFUSE_REFERENCE_ARCHS_HPP_
