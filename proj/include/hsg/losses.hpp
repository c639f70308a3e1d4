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

#include <span>

#include "hsg/head.hpp"

namespace hsg {

/// Probabilities below this are clamped before log (with a stderr warning).
inline constexpr double kProbClamp = 1e-12;

// Plain-value losses over finished predictions (reporting, external logits).

double supercat_ce(const EdgePrediction& pred, SuperCategoryId gt_super);

/// Cross-entropy of the conditional distribution under the ground-truth
/// super-category.
double conditional_ce(const EdgePrediction& pred, PredicateId gt_predicate,
                      const LabelSpace& space);

/// Binary cross-entropy of the connectivity score against {0,1}.
double connectivity_bce(double connectivity, int gt_connected);

struct ContrastiveResult {
  double value = 0.0;
  int anchors_used = 0;
  int anchors_skipped = 0;
  /// False when no anchor had both a positive and a negative; the loss is
  /// then defined as 0.
  bool valid = false;
};

/// Supervised contrastive loss. For each anchor with positives P (same
/// relation label, self excluded) and negatives N (different label):
///   -(1/|P|) * sum_{p in P} [ x_a.x_p / tau - logsumexp_{n in N}(x_a.x_n / tau) ]
/// averaged over anchors with nonempty P and N. The denominator runs over
/// negatives only, so the value may be negative.
ContrastiveResult contrastive_loss(std::span<const Vector> hidden,
                                   std::span<const int> labels, double temperature);

struct LossTerms {
  double supercat = 0.0;
  double conditional = 0.0;
  double contrastive = 0.0;
  double connectivity = 0.0;
};

struct LossWeights {
  double supercat = 1.0;
  double conditional = 1.0;
  double contrastive = 1.0;
  double connectivity = 1.0;

  void validate() const;
};

double total_loss(const LossTerms& terms, const LossWeights& weights);

// Tape losses used in training. Cross-entropies are computed from logits via
// log-sum-exp, never through an explicit log of a probability.

/// logsumexp(logits) - logits[target]
ad::Var cross_entropy_from_logits(ad::Var logits, int target);

ad::Var supercat_ce(const HeadVars& head, SuperCategoryId gt_super);

/// In bayes_consistent mode only the ground-truth super-category's sub-head
/// receives gradient; in literal_eq3 the scaled logits also pull on the
/// super-category weights.
ad::Var conditional_ce(const HeadVars& head, PredicateId gt_predicate,
                       const LabelSpace& space);

ad::Var connectivity_bce(ad::Var conn_logit, int gt_connected);

ad::Var flat_ce(const FlatVars& flat, PredicateId gt_predicate);

/// Tape contrastive loss; when no anchor is valid returns a constant zero and
/// sets result->valid = false.
ad::Var contrastive_loss(ad::Tape& tape, std::span<const ad::Var> hidden,
                         std::span<const int> labels, double temperature,
                         ContrastiveResult* result = nullptr);

}  // namespace hsg
