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

// Writes the reference graphs, search spaces and hardware profiles as JSON
// under a configs directory so they can be edited and passed to the CLI.

#include <filesystem>
#include <iostream>

#include "tinyfuse/error.hpp"
#include "tinyfuse/graph_json.hpp"
#include "tinyfuse/memory.hpp"
#include "tinyfuse/reference_archs.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace tinyfuse;
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("configs");
  try {
    fs::create_directories(root / "graphs");
    fs::create_directories(root / "search");
    fs::create_directories(root / "profiles");
    for (const auto& name : task_preset_names()) {
      const SyntheticTaskSpec task = task_preset(name);
      save_graph(reference_teacher(task), root / "graphs" / (name + "_teacher.json"));
      save_graph(reference_student(task), root / "graphs" / (name + "_student.json"));
      write_text_file(root / "search" / (name + ".json"),
                      search_space_to_json(reference_search_space(task)).dump(2) + "\n");
    }
    for (const auto& name : builtin_profile_names()) {
      write_text_file(root / "profiles" / (name + ".json"),
                      profile_to_json(builtin_profile(name)).dump(2) + "\n");
    }
  } catch (const tinyfuse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
