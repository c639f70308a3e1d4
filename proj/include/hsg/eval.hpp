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

#include <array>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hsg/geometry.hpp"
#include "hsg/head.hpp"
#include "hsg/hierarchy.hpp"

namespace hsg {

enum class Task { predcls, sgcls, sgdet };

/// How many candidates each directed edge contributes to the ranking pool:
/// per_super enters the top predicate of every super-category, single is the
/// classic graph-constrained one-best regime used by the flat baseline.
enum class CandidateRegime { per_super, single };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct GtNode {
  BoundingBox box;
  ObjectCategoryId category;
};

struct GtEdge {
  int subject = -1;
  int object = -1;
  PredicateId predicate;
};

struct SceneGraphGT {
  std::vector<GtNode> nodes;
  std::vector<GtEdge> edges;

  void validate(const LabelSpace& space) const;
};

/// A node as presented to the model for a task: ground-truth for PredCLS,
/// ground-truth box + predicted label for SGCLS, detection for SGDET.
struct EntityNode {
  BoundingBox box;
  ObjectCategoryId label;
};

/// Per-directed-pair model output, the input to ranking.
struct EdgeScores {
  int subject = -1;
  int object = -1;
  double connectivity = 1.0;
  Vector joint;        // per-predicate ranking basis
  Vector super_probs;  // empty for the flat head
};

struct Candidate {
  int subject = -1;
  int object = -1;
  PredicateId predicate;
  double score = 0.0;
  int edge_index = -1;
  BoundingBox subject_box, object_box;
  ObjectCategoryId subject_label, object_label;
};

/// Builds the candidate pool (per the regime), sorts by score descending with
/// ties broken by (edge index, predicate index), and truncates to k.
std::vector<Candidate> rank_image(std::span<const EdgeScores> edges,
                                  std::span<const EntityNode> entities,
                                  const LabelSpace& space, int k, ScoreMode score_mode,
                                  CandidateRegime regime);

struct MatchResult {
  std::vector<int> candidate_to_gt;  // -1 when unmatched
  std::vector<int> gt_to_candidate;  // -1 when unmatched
};

/// Greedy matching in rank order. A candidate matches a GT edge when the
/// predicate agrees, labels agree (SGCLS/SGDET), and both boxes overlap the
/// GT boxes with IoU >= threshold (SGDET; node identity for the other tasks).
/// Each GT edge is consumed at most once.
MatchResult match(std::span<const Candidate> candidates, const SceneGraphGT& gt,
                  Task task, double iou_threshold = 0.5);

/// One image prepared for metric computation: the full sorted candidate pool
/// plus ground truth.
struct ImageForEval {
  std::string id;
  std::vector<Candidate> pool;
  SceneGraphGT gt;
};

struct RecallAtK {
  /// Mean over images with at least one GT edge; absent if no image has GT.
  std::optional<double> recall;
  std::vector<int> gt_per_predicate;
  std::vector<int> matched_per_predicate;
  int images_scored = 0;
  int images_skipped = 0;
};

RecallAtK recall_at_k(std::span<const ImageForEval> images, int k, Task task,
                      const LabelSpace& space, double iou_threshold = 0.5);

/// Mean of per-predicate recalls over predicates with >= 1 GT edge.
std::optional<double> mean_recall_from(const RecallAtK& r);
std::optional<double> mean_recall_at_k(std::span<const ImageForEval> images, int k,
                                       Task task, const LabelSpace& space,
                                       double iou_threshold = 0.5);

/// (subject category, predicate, object category)
using Triplet = std::array<int, 3>;
using TripletSet = std::set<Triplet>;

/// R@k restricted to GT edges whose triplet was never seen in training; the
/// GT set is filtered before matching. Absent when no zero-shot GT exists.
std::optional<double> zero_shot_recall_at_k(std::span<const ImageForEval> images, int k,
                                            Task task, const LabelSpace& space,
                                            const TripletSet& train_triplets,
                                            double iou_threshold = 0.5);

struct MetricsAtK {
  int k = 0;
  std::optional<double> recall;
  std::optional<double> mean_recall;
  std::optional<double> zero_shot_recall;
  std::vector<int> gt_per_predicate;
  std::vector<int> matched_per_predicate;
};

struct TaskReport {
  Task task = Task::predcls;
  std::vector<MetricsAtK> at_k;
  int images_total = 0;
  int images_scored = 0;
  /// SGCLS/SGDET requested without detections; labels fell back to GT.
  bool label_fallback = false;
};

TaskReport evaluate_task(std::span<const ImageForEval> images, std::span<const int> ks,
                         Task task, const LabelSpace& space,
                         const std::optional<TripletSet>& train_triplets,
                         double iou_threshold = 0.5);

/// DOT digraph of the top_n candidates against ground truth. Edge classes:
/// matched candidates are true positives, unmatched GT edges false negatives,
/// unmatched candidates on a pair that carries no annotation are classed
/// "unannotated", and unmatched candidates on an annotated pair are false
/// positives.
std::string export_dot(const ImageForEval& image, int top_n, Task task,
                       const LabelSpace& space, double iou_threshold = 0.5);

}  // namespace hsg
