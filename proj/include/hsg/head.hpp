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

#include <utility>
#include <vector>

#include "hsg/hierarchy.hpp"
#include "hsg/rng.hpp"
#include "hsg/tape.hpp"

namespace hsg {

/// How per-super-category conditionals combine with the super distribution.
///
/// bayes_consistent: conditionals are softmax of the raw sub-logits and the
/// joint is the exact product p(super) * p(predicate | super), which sums to
/// one over all predicates.
///
/// literal_eq3: the sub-logits are multiplied by the super probability
/// *before* the softmax; the resulting joint is not a normalized
/// distribution. Kept for fidelity experiments.
enum class HeadMode { bayes_consistent, literal_eq3 };

/// Ranking confidence attached to a candidate predicate.
enum class ScoreMode { e_times_joint, joint_only, e_times_super };

struct HeadParams {
  Matrix w_conn;               // hidden_dim x 1
  Matrix w_sup;                // hidden_dim x S
  std::vector<Matrix> w_sub;   // per super: hidden_dim x n_s

  static HeadParams init(int hidden_dim, const LabelSpace& space, Rng& rng);
  void validate(int hidden_dim, const LabelSpace& space) const;
  int hidden_dim() const { return static_cast<int>(w_conn.rows()); }
};

/// Non-hierarchical ablation baseline: one softmax over every predicate.
struct FlatHeadParams {
  Matrix w_conn;               // hidden_dim x 1
  Matrix w_flat;               // hidden_dim x |predicates|

  static FlatHeadParams init(int hidden_dim, const LabelSpace& space, Rng& rng);
  void validate(int hidden_dim, const LabelSpace& space) const;
  int hidden_dim() const { return static_cast<int>(w_conn.rows()); }
};

struct EdgePrediction {
  double connectivity = 0.0;                 // e_ij in [0,1]
  Vector super_probs;                        // simplex over S
  std::vector<Vector> conditional_probs;     // simplex over each super's members
  Vector joint_probs;                        // per predicate
  HeadMode mode = HeadMode::bayes_consistent;

  void validate(const LabelSpace& space, double tol = 1e-9) const;
};

struct FlatPrediction {
  double connectivity = 0.0;
  Vector probs;                              // simplex over all predicates
};

EdgePrediction head_forward(const Vector& hidden, const HeadParams& params,
                            const LabelSpace& space, HeadMode mode);

FlatPrediction flat_forward(const Vector& hidden, const FlatHeadParams& params);

double score_candidate(const EdgePrediction& pred, PredicateId p, ScoreMode mode,
                       const LabelSpace& space);

/// One candidate per super-category: the member with the largest joint
/// probability (ties to the lowest predicate index), scored per `mode`.
std::vector<std::pair<PredicateId, double>> top_per_super(const EdgePrediction& pred,
                                                          const LabelSpace& space,
                                                          ScoreMode mode);

// ---------------------------------------------------------------------------
// Tape forward, used by the trainer.
// ---------------------------------------------------------------------------

struct HeadParamVars {
  ad::Var conn, sup;
  std::vector<ad::Var> sub;
};
HeadParamVars lift(ad::Tape& tape, const HeadParams& params);

struct HeadVars {
  ad::Var conn_logit, connectivity;
  ad::Var super_logits, super_probs;
  std::vector<ad::Var> sub_logits;     // raw X^T W_sub[s]
  std::vector<ad::Var> cond_logits;    // scaled in literal mode, == sub otherwise
  std::vector<ad::Var> cond_probs;
  HeadMode mode = HeadMode::bayes_consistent;

  EdgePrediction to_prediction(const LabelSpace& space) const;
};
HeadVars head_forward(ad::Var hidden, const HeadParamVars& params,
                      const LabelSpace& space, HeadMode mode);

struct FlatParamVars {
  ad::Var conn, flat;
};
FlatParamVars lift(ad::Tape& tape, const FlatHeadParams& params);

struct FlatVars {
  ad::Var conn_logit, connectivity, logits, probs;

  FlatPrediction to_prediction() const;
};
FlatVars flat_forward(ad::Var hidden, const FlatParamVars& params);

}  // namespace hsg
