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

#include "doctest.h"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace hsg;

namespace {

Vector random_simplex(Rng& rng, int n) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = -std::log(1.0 - rng.uniform());
  return v / v.sum();
}

/// Random per-pair scores over the tiny space.
std::vector<EdgeScores> random_edges(Rng& rng, int entities, const LabelSpace& space,
                                     int max_edges) {
  std::vector<EdgeScores> out;
  for (int i = 0; i < entities && static_cast<int>(out.size()) < max_edges; ++i)
    for (int j = 0; j < entities && static_cast<int>(out.size()) < max_edges; ++j) {
      if (i == j) continue;
      EdgeScores es;
      es.subject = i;
      es.object = j;
      es.connectivity = rng.uniform();
      es.joint = random_simplex(rng, space.num_predicates());
      es.super_probs = random_simplex(rng, space.num_supers());
      out.push_back(std::move(es));
    }
  return out;
}

std::vector<EntityNode> grid_entities(int n, const LabelSpace& space, Rng& rng) {
  std::vector<EntityNode> out;
  const int tiles = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
  for (int i = 0; i < n; ++i) {
    const int r = i / tiles, c = i % tiles;
    out.push_back(EntityNode{BoundingBox{(c + 0.1) / tiles, (r + 0.1) / tiles,
                                         (c + 0.9) / tiles, (r + 0.9) / tiles},
                             ObjectCategoryId(rng.uniform_int(space.num_objects()))});
  }
  return out;
}

}  // namespace

TEST_CASE("iou: identity, disjoint, 1/3 on offset unit squares") {
  const BoundingBox a{0, 0, 1, 1};
  CHECK(iou(a, a) == doctest::Approx(1.0));
  CHECK(iou(a, BoundingBox{2, 2, 3, 3}) == doctest::Approx(0.0));
  CHECK(iou(a, BoundingBox{0.5, 0.0, 1.5, 1.0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("rank_image: pool sizes, ordering, tie rule") {
  const LabelSpace space = hsg_test::tiny_space();
  Rng rng(3);
  const auto entities = grid_entities(6, space, rng);

  SUBCASE("one edge, S = 3, k = 20 gives exactly 3 candidates") {
    const auto edges = random_edges(rng, 2, space, 1);
    const auto pool = rank_image(edges, entities, space, 20,
                                 ScoreMode::e_times_joint, CandidateRegime::per_super);
    CHECK(pool.size() == 3);
    std::set<int> supers;
    for (const Candidate& c : pool) supers.insert(space.super_of(c.predicate).v);
    CHECK(supers.size() == 3);
  }

  SUBCASE("10 edges, k = 20 keeps 20 of 30, sorted; brute-force sort agrees") {
    const auto edges = random_edges(rng, 6, space, 10);
    const auto pool = rank_image(edges, entities, space, 20,
                                 ScoreMode::e_times_joint, CandidateRegime::per_super);
    REQUIRE(pool.size() == 20);
    for (std::size_t i = 1; i < pool.size(); ++i)
      CHECK(pool[i - 1].score >= pool[i].score);

    oracle::OImage img;
    for (const auto& e : entities)
      img.entities.push_back(
          {{e.box.x_min, e.box.y_min, e.box.x_max, e.box.y_max}, e.label.v});
    for (const auto& e : edges) {
      oracle::OEdgeScores oe;
      oe.subject = e.subject;
      oe.object = e.object;
      oe.connectivity = e.connectivity;
      for (int p = 0; p < space.num_predicates(); ++p) oe.joint.push_back(e.joint[p]);
      for (int s = 0; s < space.num_supers(); ++s)
        oe.super_probs.push_back(e.super_probs[s]);
      img.edges.push_back(std::move(oe));
    }
    std::vector<std::vector<int>> members;
    std::vector<int> super_of;
    for (int s = 0; s < space.num_supers(); ++s) {
      std::vector<int> m;
      for (const PredicateId p : space.predicates_in(SuperCategoryId(s))) m.push_back(p.v);
      members.push_back(m);
    }
    for (int p = 0; p < space.num_predicates(); ++p)
      super_of.push_back(space.super_of(PredicateId(p)).v);
    const auto expect =
        oracle::pool_oracle(img, members, super_of, oracle::OScore::e_joint, false);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      CHECK(pool[i].edge_index == expect[i].edge_index);
      CHECK(pool[i].predicate.v == expect[i].predicate);
      CHECK(pool[i].score == doctest::Approx(expect[i].score).epsilon(1e-15));
    }
  }

  SUBCASE("equal scores: lower edge index first") {
    std::vector<EdgeScores> edges;
    for (int e = 0; e < 2; ++e) {
      EdgeScores es;
      es.subject = e;
      es.object = e + 1;
      es.connectivity = 1.0;
      es.joint = Vector::Constant(space.num_predicates(), 0.2);
      es.super_probs = Vector::Constant(3, 1.0 / 3.0);
      edges.push_back(es);
    }
    const auto pool = rank_image(edges, entities, space, 100,
                                 ScoreMode::e_times_joint, CandidateRegime::per_super);
    REQUIRE(pool.size() == 6);
    // All scores equal: order is (edge 0: p0 p2 p3), (edge 1: p0 p2 p3).
    CHECK(pool[0].edge_index == 0);
    CHECK(pool[0].predicate == PredicateId(0));
    CHECK(pool[1].predicate == PredicateId(2));
    CHECK(pool[2].predicate == PredicateId(3));
    CHECK(pool[3].edge_index == 1);
  }

  SUBCASE("single regime yields one candidate per edge") {
    const auto edges = random_edges(rng, 4, space, 5);
    const auto pool = rank_image(edges, entities, space, 100,
                                 ScoreMode::e_times_joint, CandidateRegime::single);
    CHECK(pool.size() == 5);
  }
}

TEST_CASE("match semantics per task") {
  const LabelSpace space = hsg_test::tiny_space();
  SceneGraphGT gt;
  gt.nodes = {GtNode{BoundingBox{0.0, 0.0, 0.4, 0.4}, ObjectCategoryId(0)},
              GtNode{BoundingBox{0.6, 0.6, 1.0, 1.0}, ObjectCategoryId(1)}};
  gt.edges = {GtEdge{0, 1, PredicateId(2)}};

  Candidate c;
  c.subject = 0;
  c.object = 1;
  c.predicate = PredicateId(2);
  c.score = 0.9;
  c.edge_index = 0;
  c.subject_box = gt.nodes[0].box;
  c.object_box = gt.nodes[1].box;
  c.subject_label = ObjectCategoryId(0);
  c.object_label = ObjectCategoryId(1);

  SUBCASE("predcls: exact triple matches") {
    const auto m = match(std::vector<Candidate>{c}, gt, Task::predcls);
    CHECK(m.gt_to_candidate[0] == 0);
  }
  SUBCASE("wrong predicate never matches") {
    Candidate wrong = c;
    wrong.predicate = PredicateId(3);
    const auto m = match(std::vector<Candidate>{wrong}, gt, Task::predcls);
    CHECK(m.gt_to_candidate[0] == -1);
  }
  SUBCASE("sgcls: label must agree") {
    Candidate mislabeled = c;
    mislabeled.subject_label = ObjectCategoryId(3);
    const auto m = match(std::vector<Candidate>{mislabeled}, gt, Task::sgcls);
    CHECK(m.gt_to_candidate[0] == -1);
  }
  SUBCASE("sgdet: IoU 0.4 on the subject box fails the 0.5 threshold") {
    Candidate offset = c;
    // Boxes [0,0,.4,.4] vs [0.18,0,0.58,0.4]: intersection 0.088, union
    // 0.232, IoU ~ 0.379.
    offset.subject_box = BoundingBox{0.18, 0.0, 0.58, 0.4};
    const double actual = iou(offset.subject_box, gt.nodes[0].box);
    CHECK(actual < 0.5);
    const auto m = match(std::vector<Candidate>{offset}, gt, Task::sgdet);
    CHECK(m.gt_to_candidate[0] == -1);
    const auto ok = match(std::vector<Candidate>{c}, gt, Task::sgdet);
    CHECK(ok.gt_to_candidate[0] == 0);
  }
  SUBCASE("two candidates for one GT edge match once") {
    Candidate c2 = c;
    c2.edge_index = 1;
    const std::vector<Candidate> cands = {c, c2};
    const auto m = match(cands, gt, Task::predcls);
    CHECK(m.candidate_to_gt[0] == 0);
    CHECK(m.candidate_to_gt[1] == -1);
    int matched = 0;
    for (int g : m.gt_to_candidate)
      if (g != -1) ++matched;
    CHECK(matched == 1);
  }
}

TEST_CASE("recall arithmetic: full recall and 3 of 4") {
  const LabelSpace space = hsg_test::tiny_space();
  Rng rng(5);
  const auto entities = grid_entities(5, space, rng);

  ImageForEval img;
  img.id = "i0";
  for (const EntityNode& e : entities) img.gt.nodes.push_back(GtNode{e.box, e.label});
  img.gt.edges = {GtEdge{0, 1, PredicateId(0)}, GtEdge{1, 2, PredicateId(2)},
                  GtEdge{2, 3, PredicateId(3)}, GtEdge{3, 4, PredicateId(4)}};

  // Candidates covering only the first three GT edges.
  for (int e = 0; e < 3; ++e) {
    Candidate c;
    c.subject = img.gt.edges[static_cast<std::size_t>(e)].subject;
    c.object = img.gt.edges[static_cast<std::size_t>(e)].object;
    c.predicate = img.gt.edges[static_cast<std::size_t>(e)].predicate;
    c.score = 1.0 - 0.1 * e;
    c.edge_index = e;
    c.subject_box = entities[static_cast<std::size_t>(c.subject)].box;
    c.object_box = entities[static_cast<std::size_t>(c.object)].box;
    c.subject_label = entities[static_cast<std::size_t>(c.subject)].label;
    c.object_label = entities[static_cast<std::size_t>(c.object)].label;
    img.pool.push_back(c);
  }

  const std::vector<ImageForEval> one = {img};
  CHECK(*recall_at_k(one, 20, Task::predcls, space).recall == doctest::Approx(0.75));

  ImageForEval full = img;
  Candidate last;
  last.subject = 3;
  last.object = 4;
  last.predicate = PredicateId(4);
  last.score = 0.05;
  last.edge_index = 3;
  last.subject_box = entities[3].box;
  last.object_box = entities[4].box;
  last.subject_label = entities[3].label;
  last.object_label = entities[4].label;
  full.pool.push_back(last);
  const std::vector<ImageForEval> images = {full};
  CHECK(*recall_at_k(images, 20, Task::predcls, space).recall == doctest::Approx(1.0));

  // Images without GT are skipped; an all-empty corpus reports absence.
  ImageForEval empty;
  empty.id = "empty";
  const std::vector<ImageForEval> none = {empty};
  CHECK_FALSE(recall_at_k(none, 20, Task::predcls, space).recall.has_value());
}

TEST_CASE("mean recall: single class equals per-class recall; 1.0 and 0.0 average to 0.5") {
  const LabelSpace space = hsg_test::tiny_space();
  Rng rng(6);
  const auto entities = grid_entities(4, space, rng);
  auto mk_image = [&](PredicateId pred, bool hit) {
    ImageForEval img;
    for (const EntityNode& e : entities) img.gt.nodes.push_back(GtNode{e.box, e.label});
    img.gt.edges = {GtEdge{0, 1, pred}};
    if (hit) {
      Candidate c;
      c.subject = 0;
      c.object = 1;
      c.predicate = pred;
      c.score = 1.0;
      c.edge_index = 0;
      c.subject_box = entities[0].box;
      c.object_box = entities[1].box;
      c.subject_label = entities[0].label;
      c.object_label = entities[1].label;
      img.pool.push_back(c);
    }
    return img;
  };

  const std::vector<ImageForEval> single = {mk_image(PredicateId(2), true),
                                            mk_image(PredicateId(2), false)};
  CHECK(*mean_recall_at_k(single, 10, Task::predcls, space) == doctest::Approx(0.5));
  CHECK(*recall_at_k(single, 10, Task::predcls, space).recall == doctest::Approx(0.5));

  const std::vector<ImageForEval> two = {mk_image(PredicateId(0), true),
                                         mk_image(PredicateId(3), false)};
  CHECK(*mean_recall_at_k(two, 10, Task::predcls, space) == doctest::Approx(0.5));
}

TEST_CASE("zero-shot recall: empty train set equals plain recall exactly") {
  const LabelSpace space = hsg_test::tiny_space();
  Rng rng(11);
  std::vector<ImageForEval> images;
  for (int i = 0; i < 4; ++i) {
    const auto entities = grid_entities(4, space, rng);
    ImageForEval img;
    img.id = "i" + std::to_string(i);
    for (const EntityNode& e : entities) img.gt.nodes.push_back(GtNode{e.box, e.label});
    img.gt.edges = {GtEdge{0, 1, PredicateId(rng.uniform_int(5))},
                    GtEdge{2, 3, PredicateId(rng.uniform_int(5))}};
    const auto edges = random_edges(rng, 4, space, 12);
    img.pool = rank_image(edges, entities, space, 1000, ScoreMode::e_times_joint,
                          CandidateRegime::per_super);
    images.push_back(std::move(img));
  }
  const auto plain = recall_at_k(images, 5, Task::predcls, space);
  const auto zs = zero_shot_recall_at_k(images, 5, Task::predcls, space, TripletSet{});
  REQUIRE(zs.has_value());
  CHECK(*zs == *plain.recall);  // exact equality

  // Every triple seen -> absent value.
  TripletSet all;
  for (const ImageForEval& img : images)
    for (const GtEdge& e : img.gt.edges)
      all.insert({img.gt.nodes[static_cast<std::size_t>(e.subject)].category.v,
                  e.predicate.v,
                  img.gt.nodes[static_cast<std::size_t>(e.object)].category.v});
  CHECK_FALSE(zero_shot_recall_at_k(images, 5, Task::predcls, space, all).has_value());
}

TEST_CASE("pool invariants: sorted, bounded length; recall nondecreasing in k") {
  const LabelSpace space = hsg_test::tiny_space();
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + rng.uniform_int(3);
    const auto entities = grid_entities(n, space, rng);
    const auto edges = random_edges(rng, n, space, 8);
    const int k = 1 + rng.uniform_int(30);
    const auto pool = rank_image(edges, entities, space, k, ScoreMode::e_times_joint,
                                 CandidateRegime::per_super);
    CHECK(pool.size() ==
          std::min<std::size_t>(static_cast<std::size_t>(k), edges.size() * 3));
    for (std::size_t i = 1; i < pool.size(); ++i)
      CHECK(pool[i - 1].score >= pool[i].score);
  }

  std::vector<ImageForEval> images;
  for (int i = 0; i < 5; ++i) {
    const auto entities = grid_entities(4, space, rng);
    ImageForEval img;
    for (const EntityNode& e : entities) img.gt.nodes.push_back(GtNode{e.box, e.label});
    img.gt.edges = {GtEdge{0, 1, PredicateId(rng.uniform_int(5))},
                    GtEdge{1, 2, PredicateId(rng.uniform_int(5))}};
    img.pool = rank_image(random_edges(rng, 4, space, 12), entities, space, 1000,
                          ScoreMode::e_times_joint, CandidateRegime::per_super);
    images.push_back(std::move(img));
  }
  double prev = 0.0;
  for (int k : {1, 2, 3, 5, 10, 20, 50}) {
    const double r = *recall_at_k(images, k, Task::predcls, space).recall;
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("export_dot: empty graph, matched edge, deterministic text") {
  const LabelSpace space = hsg_test::tiny_space();
  ImageForEval empty;
  const std::string dot = export_dot(empty, 5, Task::predcls, space);
  CHECK(dot.find("digraph scene {") == 0);
  CHECK(dot.find("->") == std::string::npos);

  ImageForEval img;
  img.gt.nodes = {GtNode{BoundingBox{0, 0, 0.4, 0.4}, ObjectCategoryId(0)},
                  GtNode{BoundingBox{0.6, 0.6, 1, 1}, ObjectCategoryId(1)},
                  GtNode{BoundingBox{0.1, 0.6, 0.4, 1}, ObjectCategoryId(2)}};
  img.gt.edges = {GtEdge{0, 1, PredicateId(0)}, GtEdge{1, 2, PredicateId(3)}};
  auto add_candidate = [&](int s, int o, int p, double score, int e) {
    Candidate c;
    c.subject = s;
    c.object = o;
    c.predicate = PredicateId(p);
    c.score = score;
    c.edge_index = e;
    c.subject_box = img.gt.nodes[static_cast<std::size_t>(s)].box;
    c.object_box = img.gt.nodes[static_cast<std::size_t>(o)].box;
    c.subject_label = img.gt.nodes[static_cast<std::size_t>(s)].category;
    c.object_label = img.gt.nodes[static_cast<std::size_t>(o)].category;
    img.pool.push_back(c);
  };
  add_candidate(0, 1, 0, 0.9, 0);  // true positive
  add_candidate(0, 1, 2, 0.7, 0);  // annotated pair, wrong predicate -> FP
  add_candidate(0, 2, 4, 0.6, 1);  // unannotated pair -> blue
  // GT edge 1->2 unmatched -> dashed FN

  const std::string out = export_dot(img, 5, Task::predcls, space);
  CHECK(out.find("n0 -> n1 [label=\"p0 (0.9000)\", color=deeppink, style=solid]") !=
        std::string::npos);
  CHECK(out.find("color=gray") != std::string::npos);
  CHECK(out.find("color=steelblue") != std::string::npos);
  CHECK(out.find("style=dashed") != std::string::npos);
  CHECK(out == export_dot(img, 5, Task::predcls, space));  // byte-stable

  const std::string golden = hsg_test::read_file(HSG_TEST_DATA_DIR "/golden_scene.dot");
  CHECK(out == golden);
}

TEST_CASE("randomized micro-corpora agree with the brute-force oracle exactly") {
  const LabelSpace space = hsg_test::tiny_space();
  std::vector<std::vector<int>> members;
  std::vector<int> super_of_vec;
  for (int s = 0; s < space.num_supers(); ++s) {
    std::vector<int> m;
    for (const PredicateId p : space.predicates_in(SuperCategoryId(s))) m.push_back(p.v);
    members.push_back(m);
  }
  for (int p = 0; p < space.num_predicates(); ++p)
    super_of_vec.push_back(space.super_of(PredicateId(p)).v);

  Rng rng(101);
  for (int corpus = 0; corpus < 20; ++corpus) {
    const int num_images = 1 + rng.uniform_int(4);
    std::vector<ImageForEval> images;
    std::vector<oracle::OImage> oimages;
    for (int i = 0; i < num_images; ++i) {
      const int n = 2 + rng.uniform_int(3);
      const auto entities = grid_entities(n, space, rng);
      ImageForEval img;
      img.id = "c" + std::to_string(corpus) + "_i" + std::to_string(i);
      for (const EntityNode& e : entities) img.gt.nodes.push_back(GtNode{e.box, e.label});
      const int num_gt = rng.uniform_int(4);
      std::set<std::array<int, 3>> used;
      for (int g = 0; g < num_gt; ++g) {
        const int s = rng.uniform_int(n);
        int o = rng.uniform_int(n);
        if (s == o) continue;
        const int p = rng.uniform_int(space.num_predicates());
        if (!used.insert({s, o, p}).second) continue;
        img.gt.edges.push_back(GtEdge{s, o, PredicateId(p)});
      }
      const auto edges = random_edges(rng, n, space, 5);
      img.pool = rank_image(edges, entities, space, 10000, ScoreMode::e_times_joint,
                            CandidateRegime::per_super);

      oracle::OImage oi;
      for (const EntityNode& e : entities)
        oi.entities.push_back({{e.box.x_min, e.box.y_min, e.box.x_max, e.box.y_max},
                               e.label.v});
      oi.gt_nodes = oi.entities;
      for (const GtEdge& e : img.gt.edges)
        oi.gt_edges.push_back({e.subject, e.object, e.predicate.v});
      for (const EdgeScores& e : edges) {
        oracle::OEdgeScores oe;
        oe.subject = e.subject;
        oe.object = e.object;
        oe.connectivity = e.connectivity;
        for (int p = 0; p < space.num_predicates(); ++p) oe.joint.push_back(e.joint[p]);
        for (int s = 0; s < space.num_supers(); ++s)
          oe.super_probs.push_back(e.super_probs[s]);
        oi.edges.push_back(std::move(oe));
      }
      images.push_back(std::move(img));
      oimages.push_back(std::move(oi));
    }

    for (const int k : {1, 3, 20}) {
      const auto lib = recall_at_k(images, k, Task::predcls, space);
      const auto mr = mean_recall_from(lib);
      const auto orc = oracle::metrics_oracle(oimages, members, super_of_vec,
                                              space.num_predicates(), k,
                                              oracle::OTask::predcls,
                                              oracle::OScore::e_joint, false, 0.5, nullptr);
      CHECK(lib.recall.has_value() == orc.recall.has_value());
      if (lib.recall) CHECK(std::abs(*lib.recall - *orc.recall) <= 1e-12);
      CHECK(mr.has_value() == orc.mean_recall.has_value());
      if (mr) CHECK(std::abs(*mr - *orc.mean_recall) <= 1e-12);
    }
  }
}
