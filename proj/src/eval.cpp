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
#include "hsg/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace hsg {

std::string to_string(Task t) {
  switch (t) {
    case Task::predcls: return "predcls";
    case Task::sgcls: return "sgcls";
    case Task::sgdet: return "sgdet";
  }
  throw Error("to_string: unknown task");
}

Task task_from_string(const std::string& s) {
  if (s == "predcls") return Task::predcls;
  if (s == "sgcls") return Task::sgcls;
  if (s == "sgdet") return Task::sgdet;
  throw ParseError("unknown task '" + s + "' (expected predcls, sgcls, sgdet)");
}

void SceneGraphGT::validate(const LabelSpace& space) const {
  for (const GtNode& n : nodes) {
    n.box.validate();
    if (n.category.v < 0 || n.category.v >= space.num_objects())
      throw Error("SceneGraphGT: node category out of range");
  }
  std::set<std::array<int, 3>> seen;
  for (const GtEdge& e : edges) {
    if (e.subject < 0 || e.subject >= static_cast<int>(nodes.size()) || e.object < 0 ||
        e.object >= static_cast<int>(nodes.size()))
      throw Error("SceneGraphGT: edge references missing node");
    if (e.predicate.v < 0 || e.predicate.v >= space.num_predicates())
      throw Error("SceneGraphGT: edge predicate out of range");
    if (!seen.insert({e.subject, e.object, e.predicate.v}).second)
      throw Error("SceneGraphGT: duplicate (subject, object, predicate) triple");
  }
}

namespace {

double score_from(const EdgeScores& e, PredicateId p, ScoreMode mode,
                  const LabelSpace& space) {
  switch (mode) {
    case ScoreMode::e_times_joint:
      return e.connectivity * e.joint[p.v];
    case ScoreMode::joint_only:
      return e.joint[p.v];
    case ScoreMode::e_times_super:
      if (e.super_probs.size() != space.num_supers())
        throw Error("score: e_times_super needs super-category probabilities");
      return e.connectivity * e.super_probs[space.super_of(p).v];
  }
  throw Error("score: unknown mode");
}

PredicateId argmax_over(const Vector& joint, std::span<const PredicateId> members) {
  PredicateId best = members.front();
  double best_v = joint[best.v];
  for (const PredicateId p : members) {
    if (joint[p.v] > best_v) {  // strict: ties keep the lowest index
      best = p;
      best_v = joint[p.v];
    }
  }
  return best;
}

}  // namespace

std::vector<Candidate> rank_image(std::span<const EdgeScores> edges,
                                  std::span<const EntityNode> entities,
                                  const LabelSpace& space, int k, ScoreMode score_mode,
                                  CandidateRegime regime) {
  if (k < 1) throw Error("rank_image: k must be >= 1");
  std::vector<Candidate> pool;
  std::vector<PredicateId> all;
  for (int p = 0; p < space.num_predicates(); ++p) all.push_back(PredicateId(p));

  for (std::size_t ei = 0; ei < edges.size(); ++ei) {
    const EdgeScores& e = edges[ei];
    if (e.joint.size() != space.num_predicates())
      throw ShapeError("rank_image: joint vector size != |predicates|");
    if (e.subject < 0 || e.subject >= static_cast<int>(entities.size()) || e.object < 0 ||
        e.object >= static_cast<int>(entities.size()))
      throw Error("rank_image: edge references missing entity");

    std::vector<PredicateId> picks;
    if (regime == CandidateRegime::per_super) {
      for (int s = 0; s < space.num_supers(); ++s)
        picks.push_back(argmax_over(e.joint, space.predicates_in(SuperCategoryId(s))));
    } else {
      picks.push_back(argmax_over(e.joint, all));
    }
    for (const PredicateId p : picks) {
      Candidate c;
      c.subject = e.subject;
      c.object = e.object;
      c.predicate = p;
      c.score = score_from(e, p, score_mode, space);
      if (!std::isfinite(c.score)) throw NumericError("rank_image: non-finite score");
      c.edge_index = static_cast<int>(ei);
      c.subject_box = entities[static_cast<std::size_t>(e.subject)].box;
      c.object_box = entities[static_cast<std::size_t>(e.object)].box;
      c.subject_label = entities[static_cast<std::size_t>(e.subject)].label;
      c.object_label = entities[static_cast<std::size_t>(e.object)].label;
      pool.push_back(c);
    }
  }

  std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.edge_index != b.edge_index) return a.edge_index < b.edge_index;
    return a.predicate.v < b.predicate.v;
  });
  if (static_cast<int>(pool.size()) > k) pool.resize(static_cast<std::size_t>(k));
  return pool;
}

namespace {

bool compatible(const Candidate& c, const GtEdge& g, const SceneGraphGT& gt, Task task,
                double iou_threshold) {
  if (!(c.predicate == g.predicate)) return false;
  switch (task) {
    case Task::predcls:
      return c.subject == g.subject && c.object == g.object;
    case Task::sgcls:
      return c.subject == g.subject && c.object == g.object &&
             c.subject_label == gt.nodes[static_cast<std::size_t>(g.subject)].category &&
             c.object_label == gt.nodes[static_cast<std::size_t>(g.object)].category;
    case Task::sgdet:
      return c.subject_label == gt.nodes[static_cast<std::size_t>(g.subject)].category &&
             c.object_label == gt.nodes[static_cast<std::size_t>(g.object)].category &&
             iou(c.subject_box, gt.nodes[static_cast<std::size_t>(g.subject)].box) >=
                 iou_threshold &&
             iou(c.object_box, gt.nodes[static_cast<std::size_t>(g.object)].box) >=
                 iou_threshold;
  }
  return false;
}

}  // namespace

MatchResult match(std::span<const Candidate> candidates, const SceneGraphGT& gt,
                  Task task, double iou_threshold) {
  MatchResult res;
  res.candidate_to_gt.assign(candidates.size(), -1);
  res.gt_to_candidate.assign(gt.edges.size(), -1);
  for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
    for (std::size_t gi = 0; gi < gt.edges.size(); ++gi) {
      if (res.gt_to_candidate[gi] != -1) continue;
      if (compatible(candidates[ci], gt.edges[gi], gt, task, iou_threshold)) {
        res.gt_to_candidate[gi] = static_cast<int>(ci);
        res.candidate_to_gt[ci] = static_cast<int>(gi);
        break;
      }
    }
  }
  return res;
}

RecallAtK recall_at_k(std::span<const ImageForEval> images, int k, Task task,
                      const LabelSpace& space, double iou_threshold) {
  if (k < 1) throw Error("recall_at_k: k must be >= 1");
  RecallAtK out;
  out.gt_per_predicate.assign(static_cast<std::size_t>(space.num_predicates()), 0);
  out.matched_per_predicate.assign(static_cast<std::size_t>(space.num_predicates()), 0);
  double acc = 0.0;
  for (const ImageForEval& img : images) {
    if (img.gt.edges.empty()) {
      ++out.images_skipped;
      continue;
    }
    const std::size_t take =
        std::min<std::size_t>(img.pool.size(), static_cast<std::size_t>(k));
    const std::span<const Candidate> topk(img.pool.data(), take);
    const MatchResult m = match(topk, img.gt, task, iou_threshold);
    int matched = 0;
    for (std::size_t gi = 0; gi < img.gt.edges.size(); ++gi) {
      const int p = img.gt.edges[gi].predicate.v;
      ++out.gt_per_predicate[static_cast<std::size_t>(p)];
      if (m.gt_to_candidate[gi] != -1) {
        ++matched;
        ++out.matched_per_predicate[static_cast<std::size_t>(p)];
      }
    }
    acc += static_cast<double>(matched) / static_cast<double>(img.gt.edges.size());
    ++out.images_scored;
  }
  if (out.images_scored > 0) out.recall = acc / static_cast<double>(out.images_scored);
  return out;
}

std::optional<double> mean_recall_from(const RecallAtK& r) {
  double acc = 0.0;
  int classes = 0;
  for (std::size_t p = 0; p < r.gt_per_predicate.size(); ++p) {
    if (r.gt_per_predicate[p] == 0) continue;
    acc += static_cast<double>(r.matched_per_predicate[p]) /
           static_cast<double>(r.gt_per_predicate[p]);
    ++classes;
  }
  if (classes == 0) return std::nullopt;
  return acc / static_cast<double>(classes);
}

std::optional<double> mean_recall_at_k(std::span<const ImageForEval> images, int k,
                                       Task task, const LabelSpace& space,
                                       double iou_threshold) {
  return mean_recall_from(recall_at_k(images, k, task, space, iou_threshold));
}

namespace {

Triplet triplet_of(const GtEdge& e, const SceneGraphGT& gt) {
  return {gt.nodes[static_cast<std::size_t>(e.subject)].category.v, e.predicate.v,
          gt.nodes[static_cast<std::size_t>(e.object)].category.v};
}

}  // namespace

std::optional<double> zero_shot_recall_at_k(std::span<const ImageForEval> images, int k,
                                            Task task, const LabelSpace& space,
                                            const TripletSet& train_triplets,
                                            double iou_threshold) {
  std::vector<ImageForEval> restricted;
  restricted.reserve(images.size());
  int zero_shot_edges = 0;
  for (const ImageForEval& img : images) {
    ImageForEval r;
    r.id = img.id;
    r.pool = img.pool;
    r.gt.nodes = img.gt.nodes;
    for (const GtEdge& e : img.gt.edges)
      if (train_triplets.find(triplet_of(e, img.gt)) == train_triplets.end()) {
        r.gt.edges.push_back(e);
        ++zero_shot_edges;
      }
    restricted.push_back(std::move(r));
  }
  if (zero_shot_edges == 0) return std::nullopt;
  return recall_at_k(restricted, k, task, space, iou_threshold).recall;
}

TaskReport evaluate_task(std::span<const ImageForEval> images, std::span<const int> ks,
                         Task task, const LabelSpace& space,
                         const std::optional<TripletSet>& train_triplets,
                         double iou_threshold) {
  TaskReport report;
  report.task = task;
  report.images_total = static_cast<int>(images.size());
  for (const int k : ks) {
    MetricsAtK m;
    m.k = k;
    const RecallAtK r = recall_at_k(images, k, task, space, iou_threshold);
    m.recall = r.recall;
    m.mean_recall = mean_recall_from(r);
    m.gt_per_predicate = r.gt_per_predicate;
    m.matched_per_predicate = r.matched_per_predicate;
    if (train_triplets)
      m.zero_shot_recall =
          zero_shot_recall_at_k(images, k, task, space, *train_triplets, iou_threshold);
    report.images_scored = r.images_scored;
    report.at_k.push_back(std::move(m));
  }
  return report;
}

std::string export_dot(const ImageForEval& image, int top_n, Task task,
                       const LabelSpace& space, double iou_threshold) {
  if (top_n < 1) throw Error("export_dot: top_n must be >= 1");
  const std::size_t take =
      std::min<std::size_t>(image.pool.size(), static_cast<std::size_t>(top_n));
  const std::span<const Candidate> top(image.pool.data(), take);
  const MatchResult m = match(top, image.gt, task, iou_threshold);

  std::set<std::pair<int, int>> annotated_pairs;
  for (const GtEdge& e : image.gt.edges) annotated_pairs.insert({e.subject, e.object});

  // "Annotated" for SGDET means some GT edge overlaps the candidate's pair of
  // boxes at the matching threshold, since candidate indices reference
  // detections rather than GT nodes.
  auto pair_annotated = [&](const Candidate& c) {
    if (task != Task::sgdet) return annotated_pairs.count({c.subject, c.object}) > 0;
    for (const GtEdge& e : image.gt.edges) {
      const auto& sb = image.gt.nodes[static_cast<std::size_t>(e.subject)].box;
      const auto& ob = image.gt.nodes[static_cast<std::size_t>(e.object)].box;
      if (iou(c.subject_box, sb) >= iou_threshold && iou(c.object_box, ob) >= iou_threshold)
        return true;
    }
    return false;
  };

  auto fmt_score = [](double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", s);
    return std::string(buf);
  };

  // Candidate endpoints share the GT node space except for SGDET, where they
  // are detections and get their own nodes.
  const char* cand_prefix = task == Task::sgdet ? "d" : "n";

  std::ostringstream dot;
  dot << "digraph scene {\n";
  dot << "  // true positive: solid pink; false negative: dashed pink;\n";
  dot << "  // unannotated pair: solid blue; false positive: solid gray\n";
  dot << "  rankdir=LR;\n";
  for (std::size_t n = 0; n < image.gt.nodes.size(); ++n)
    dot << "  n" << n << " [label=\""
        << space.object_name(image.gt.nodes[n].category) << "\"];\n";
  if (task == Task::sgdet) {
    std::set<int> det_nodes;
    for (const Candidate& c : top) {
      det_nodes.insert(c.subject);
      det_nodes.insert(c.object);
    }
    for (const Candidate& c : top) {
      if (det_nodes.count(c.subject))
        dot << "  d" << c.subject << " [label=\"" << space.object_name(c.subject_label)
            << "\", shape=box];\n";
      det_nodes.erase(c.subject);
      if (det_nodes.count(c.object))
        dot << "  d" << c.object << " [label=\"" << space.object_name(c.object_label)
            << "\", shape=box];\n";
      det_nodes.erase(c.object);
    }
  }
  for (std::size_t ci = 0; ci < top.size(); ++ci) {
    const Candidate& c = top[ci];
    const char* style;
    if (m.candidate_to_gt[ci] != -1) {
      style = "color=deeppink, style=solid";
    } else if (!pair_annotated(c)) {
      style = "color=steelblue, style=solid";
    } else {
      style = "color=gray, style=solid";
    }
    dot << "  " << cand_prefix << c.subject << " -> " << cand_prefix << c.object
        << " [label=\"" << space.predicate_name(c.predicate) << " ("
        << fmt_score(c.score) << ")\", " << style << "];\n";
  }
  for (std::size_t gi = 0; gi < image.gt.edges.size(); ++gi) {
    if (m.gt_to_candidate[gi] != -1) continue;
    const GtEdge& e = image.gt.edges[gi];
    dot << "  n" << e.subject << " -> n" << e.object << " [label=\""
        << space.predicate_name(e.predicate) << "\", color=deeppink, style=dashed];\n";
  }
  dot << "}\n";
  return dot.str();
}

}  // namespace hsg
