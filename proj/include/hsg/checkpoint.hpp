// Copyright 2026 The HSG Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <filesystem>
#include <string>

#include "hsg/assembly.hpp"
#include "hsg/head.hpp"

namespace hsg {

enum class HeadKind { bayes, flat };

std::string to_string(HeadKind k);
HeadKind head_kind_from_string(const std::string& s);
std::string to_string(HeadMode m);
HeadMode head_mode_from_string(const std::string& s);

/// Trained parameters plus the shape metadata needed to run them.
struct Checkpoint {
  HeadKind head = HeadKind::bayes;
  HeadMode mode = HeadMode::bayes_consistent;
  AssemblyParams assembly;
  HeadParams bayes_params;      // populated when head == bayes
  FlatHeadParams flat_params;   // populated when head == flat
  int grid_channels = 0;
  int grid_height = 0;
  int grid_width = 0;
  std::string train_config_json = "{}";

  int hidden_dim() const { return assembly.hidden_dim(); }
  void validate(const LabelSpace& space) const;
};

/// Round trips are bitwise exact. The container records the hierarchy digest;
/// loading against a different hierarchy fails.
void save_checkpoint(const Checkpoint& ckpt, const LabelSpace& space,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const LabelSpace& space);

}  // namespace hsg
