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
#include "hsg/report.hpp"

#include <fstream>

#include <json.hpp>

namespace hsg {

using nlohmann::json;

std::string report_to_json(const std::vector<TaskReport>& reports,
                           const LabelSpace& space, const std::string& config_echo_json) {
  json j;
  j["config"] = json::parse(config_echo_json);
  json tasks = json::array();
  for (const TaskReport& r : reports) {
    json jt;
    jt["task"] = to_string(r.task);
    jt["images_total"] = r.images_total;
    jt["images_scored"] = r.images_scored;
    jt["label_fallback"] = r.label_fallback;
    json at_k = json::array();
    for (const MetricsAtK& m : r.at_k) {
      json jm;
      jm["k"] = m.k;
      jm["recall"] = m.recall ? json(*m.recall) : json(nullptr);
      jm["mean_recall"] = m.mean_recall ? json(*m.mean_recall) : json(nullptr);
      jm["zero_shot_recall"] =
          m.zero_shot_recall ? json(*m.zero_shot_recall) : json(nullptr);
      json per_pred = json::array();
      for (std::size_t p = 0; p < m.gt_per_predicate.size(); ++p) {
        json jp;
        jp["predicate"] = space.predicate_name(PredicateId(static_cast<int>(p)));
        jp["gt"] = m.gt_per_predicate[p];
        jp["matched"] = m.matched_per_predicate[p];
        jp["recall"] = m.gt_per_predicate[p] > 0
                           ? json(static_cast<double>(m.matched_per_predicate[p]) /
                                  static_cast<double>(m.gt_per_predicate[p]))
                           : json(nullptr);
        per_pred.push_back(std::move(jp));
      }
      jm["per_predicate"] = per_pred;
      at_k.push_back(std::move(jm));
    }
    jt["at_k"] = at_k;
    tasks.push_back(std::move(jt));
  }
  j["tasks"] = tasks;
  return j.dump(2);
}

void write_report(const std::vector<TaskReport>& reports, const LabelSpace& space,
                  const std::string& config_echo_json,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("report: cannot open " + path.string() + " for writing");
  out << report_to_json(reports, space, config_echo_json) << "\n";
}

void write_candidates_jsonl(const std::vector<ImageForEval>& images,
                            const LabelSpace& space,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("candidates: cannot open " + path.string() + " for writing");
  for (const ImageForEval& img : images) {
    for (const Candidate& c : img.pool) {
      json j;
      j["image"] = img.id;
      j["subject"] = c.subject;
      j["object"] = c.object;
      j["subject_box"] = {c.subject_box.x_min, c.subject_box.y_min, c.subject_box.x_max,
                          c.subject_box.y_max};
      j["object_box"] = {c.object_box.x_min, c.object_box.y_min, c.object_box.x_max,
                         c.object_box.y_max};
      j["subject_label"] = space.object_name(c.subject_label);
      j["object_label"] = space.object_name(c.object_label);
      j["predicate"] = space.predicate_name(c.predicate);
      j["score"] = c.score;
      out << j.dump() << "\n";
    }
  }
}

}  // namespace hsg
