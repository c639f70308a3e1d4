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
#include <vector>

#include "hsg/eval.hpp"

namespace hsg {

/// Full evaluation report as JSON: per-task, per-k metrics (null when a
/// metric is undefined), per-predicate recall, and an echo of the resolved
/// configuration.
std::string report_to_json(const std::vector<TaskReport>& reports,
                           const LabelSpace& space, const std::string& config_echo_json);

void write_report(const std::vector<TaskReport>& reports, const LabelSpace& space,
                  const std::string& config_echo_json,
                  const std::filesystem::path& path);

/// JSON-lines candidate dump: one record per candidate of each image's pool.
void write_candidates_jsonl(const std::vector<ImageForEval>& images,
                            const LabelSpace& space,
                            const std::filesystem::path& path);

}  // namespace hsg
