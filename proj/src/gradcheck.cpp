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
#include "hsg/gradcheck.hpp"

#include <algorithm>

#include "hsg/assembly.hpp"
#include "hsg/losses.hpp"

namespace hsg {

namespace {

LabelSpace micro_space() {
  return LabelSpace::build(
      {"thing_0", "thing_1", "thing_2", "thing_3"},
      {"rel_0", "rel_1", "rel_2", "rel_3", "rel_4", "rel_5"},
      {"grp_0", "grp_1", "grp_2"},
      {{"rel_0", "grp_0"}, {"rel_1", "grp_0"}, {"rel_2", "grp_1"},
       {"rel_3", "grp_1"}, {"rel_4", "grp_2"}, {"rel_5", "grp_2"}});
}

BoundingBox random_box(Rng& rng) {
  const double x0 = rng.uniform(0.0, 0.6);
  const double y0 = rng.uniform(0.0, 0.6);
  return BoundingBox{x0, y0, x0 + rng.uniform(0.3, 0.4), y0 + rng.uniform(0.3, 0.4)};
}

}  // namespace

double gradcheck_pipeline(std::uint64_t seed, HeadKind kind, HeadMode mode, double eps) {
  Rng rng(seed);
  const LabelSpace space = micro_space();
  const int C = 3, H = 4, W = 4, d = 8;
  const double tau = 0.5;

  FeatureGrid grid;
  grid.height = H;
  grid.width = W;
  grid.values = Matrix(C, H * W);
  for (int ch = 0; ch < C; ++ch)
    for (int cell = 0; cell < H * W; ++cell) grid.values(ch, cell) = rng.normal();

  struct EdgeSpecimen {
    BoundingBox subject_box, object_box;
    ObjectCategoryId subject_cat, object_cat;
    PredicateId predicate;
  };
  std::vector<EdgeSpecimen> edges;
  for (int e = 0; e < 4; ++e) {
    EdgeSpecimen s;
    s.subject_box = random_box(rng);
    s.object_box = random_box(rng);
    s.subject_cat = ObjectCategoryId(rng.uniform_int(space.num_objects()));
    s.object_cat = ObjectCategoryId(rng.uniform_int(space.num_objects()));
    s.predicate = PredicateId(rng.uniform_int(space.num_predicates()));
    edges.push_back(s);
  }
  // Guarantee the contrastive loss sees a positive pair and a negative.
  edges[0].predicate = PredicateId(0);
  edges[1].predicate = PredicateId(3);
  edges[2].predicate = PredicateId(0);

  const int in_dim = assembly_input_dim(C, space);
  std::vector<Matrix> leaves;
  Rng init_rng(seed + 1);
  leaves.push_back(AssemblyParams::init(in_dim, d, init_rng).w_proj);
  HeadParams bayes = HeadParams::init(d, space, init_rng);
  FlatHeadParams flat = FlatHeadParams::init(d, space, init_rng);
  if (kind == HeadKind::bayes) {
    leaves.push_back(bayes.w_conn);
    leaves.push_back(bayes.w_sup);
    for (const Matrix& w : bayes.w_sub) leaves.push_back(w);
  } else {
    leaves.push_back(flat.w_conn);
    leaves.push_back(flat.w_flat);
  }

  auto build = [&](ad::Tape& tape, std::span<const ad::Var> vars) -> ad::Var {
    const ad::Var w_proj = vars[0];
    HeadParamVars bayes_vars;
    FlatParamVars flat_vars;
    if (kind == HeadKind::bayes) {
      bayes_vars.conn = vars[1];
      bayes_vars.sup = vars[2];
      for (std::size_t s = 3; s < vars.size(); ++s) bayes_vars.sub.push_back(vars[s]);
    } else {
      flat_vars.conn = vars[1];
      flat_vars.flat = vars[2];
    }

    ad::Var grid_leaf = tape.input(grid.values);
    std::vector<ad::Var> hidden;
    std::vector<int> labels;
    std::vector<ad::Var> sup_terms, cond_terms, conn_terms;
    for (const EdgeSpecimen& e : edges) {
      ad::Var x = assemble_edge(tape, grid_leaf, H, W, e.subject_box, e.object_box,
                                e.subject_cat, e.object_cat, space, w_proj);
      hidden.push_back(x);
      labels.push_back(e.predicate.v);
      if (kind == HeadKind::bayes) {
        HeadVars h = head_forward(x, bayes_vars, space, mode);
        sup_terms.push_back(supercat_ce(h, space.super_of(e.predicate)));
        cond_terms.push_back(conditional_ce(h, e.predicate, space));
        conn_terms.push_back(connectivity_bce(h.conn_logit, 1));
      } else {
        FlatVars f = flat_forward(x, flat_vars);
        cond_terms.push_back(flat_ce(f, e.predicate));
        conn_terms.push_back(connectivity_bce(f.conn_logit, 1));
      }
    }
    // One non-connected pair with the subject/object roles swapped.
    {
      const EdgeSpecimen& e = edges[0];
      ad::Var x = assemble_edge(tape, grid_leaf, H, W, e.object_box, e.subject_box,
                                e.object_cat, e.subject_cat, space, w_proj);
      if (kind == HeadKind::bayes) {
        HeadVars h = head_forward(x, bayes_vars, space, mode);
        conn_terms.push_back(connectivity_bce(h.conn_logit, 0));
      } else {
        FlatVars f = flat_forward(x, flat_vars);
        conn_terms.push_back(connectivity_bce(f.conn_logit, 0));
      }
    }

    auto mean_of = [&tape](const std::vector<ad::Var>& terms) {
      if (terms.empty()) return tape.scalar_input(0.0);
      ad::Var total = terms.front();
      for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
      return ad::scale(total, 1.0 / static_cast<double>(terms.size()));
    };
    ad::Var loss = ad::add(ad::add(mean_of(sup_terms), mean_of(cond_terms)),
                           mean_of(conn_terms));
    loss = ad::add(loss, contrastive_loss(tape, hidden, labels, tau));
    return loss;
  };

  return ad::grad_check(leaves, build, eps);
}

double run_gradcheck(std::uint64_t base_seed, int num_seeds, double eps) {
  double worst = 0.0;
  for (int s = 0; s < num_seeds; ++s) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
    worst = std::max(worst, gradcheck_pipeline(seed, HeadKind::bayes,
                                               HeadMode::bayes_consistent, eps));
    worst = std::max(worst,
                     gradcheck_pipeline(seed, HeadKind::bayes, HeadMode::literal_eq3, eps));
    worst = std::max(worst, gradcheck_pipeline(seed, HeadKind::flat,
                                               HeadMode::bayes_consistent, eps));
  }
  return worst;
}

}  // namespace hsg
