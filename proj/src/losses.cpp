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
#include "hsg/losses.hpp"

#include <cmath>
#include <iostream>

#include "hsg/numeric.hpp"

namespace hsg {

namespace {

double clamped_log(double p, const char* what) {
  if (p < kProbClamp) {
    std::cerr << "warning: " << what << " probability " << p << " clamped to "
              << kProbClamp << "\n";
    p = kProbClamp;
  }
  return std::log(p);
}

}  // namespace

double supercat_ce(const EdgePrediction& pred, SuperCategoryId gt_super) {
  if (gt_super.v < 0 || gt_super.v >= pred.super_probs.size())
    throw Error("supercat_ce: super-category id out of range");
  return -clamped_log(pred.super_probs[gt_super.v], "supercat_ce");
}

double conditional_ce(const EdgePrediction& pred, PredicateId gt_predicate,
                      const LabelSpace& space) {
  const SuperCategoryId s = space.super_of(gt_predicate);
  const int within = space.index_within_super(gt_predicate);
  const Vector& cond = pred.conditional_probs.at(static_cast<std::size_t>(s.v));
  return -clamped_log(cond[within], "conditional_ce");
}

double connectivity_bce(double connectivity, int gt_connected) {
  if (gt_connected != 0 && gt_connected != 1)
    throw Error("connectivity_bce: label must be 0 or 1");
  if (!(connectivity >= 0.0 && connectivity <= 1.0))
    throw NumericError("connectivity_bce: connectivity outside [0,1]");
  const double p = gt_connected == 1 ? connectivity : 1.0 - connectivity;
  return -clamped_log(p, "connectivity_bce");
}

ContrastiveResult contrastive_loss(std::span<const Vector> hidden,
                                   std::span<const int> labels, double temperature) {
  if (hidden.size() != labels.size())
    throw ShapeError("contrastive_loss: hidden/label count mismatch");
  if (hidden.size() < 2) throw Error("contrastive_loss: batch size must be >= 2");
  if (!(temperature > 0.0)) throw Error("contrastive_loss: temperature must be > 0");

  ContrastiveResult res;
  double total = 0.0;
  const int n = static_cast<int>(hidden.size());
  for (int a = 0; a < n; ++a) {
    std::vector<int> pos, neg;
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      (labels[static_cast<std::size_t>(b)] == labels[static_cast<std::size_t>(a)] ? pos : neg)
          .push_back(b);
    }
    if (pos.empty() || neg.empty()) {
      ++res.anchors_skipped;
      continue;
    }
    Vector neg_logits(static_cast<Eigen::Index>(neg.size()));
    for (std::size_t i = 0; i < neg.size(); ++i)
      neg_logits[static_cast<Eigen::Index>(i)] =
          hidden[static_cast<std::size_t>(a)].dot(hidden[static_cast<std::size_t>(neg[i])]) /
          temperature;
    const double lse = logsumexp(neg_logits);
    double pos_sum = 0.0;
    for (int p : pos)
      pos_sum += hidden[static_cast<std::size_t>(a)].dot(hidden[static_cast<std::size_t>(p)]) /
                 temperature;
    total += lse - pos_sum / static_cast<double>(pos.size());
    ++res.anchors_used;
  }
  if (res.anchors_used == 0) return res;  // value 0, valid false
  res.value = total / static_cast<double>(res.anchors_used);
  res.valid = true;
  if (!std::isfinite(res.value)) throw NumericError("contrastive_loss: non-finite");
  return res;
}

void LossWeights::validate() const {
  if (supercat < 0 || conditional < 0 || contrastive < 0 || connectivity < 0)
    throw Error("LossWeights: weights must be >= 0");
}

double total_loss(const LossTerms& terms, const LossWeights& weights) {
  weights.validate();
  return weights.supercat * terms.supercat + weights.conditional * terms.conditional +
         weights.contrastive * terms.contrastive +
         weights.connectivity * terms.connectivity;
}

ad::Var cross_entropy_from_logits(ad::Var logits, int target) {
  return ad::logsumexp(logits) - ad::pick(logits, target);
}

ad::Var supercat_ce(const HeadVars& head, SuperCategoryId gt_super) {
  if (gt_super.v < 0 || gt_super.v >= head.super_logits.rows())
    throw Error("supercat_ce: super-category id out of range");
  return cross_entropy_from_logits(head.super_logits, gt_super.v);
}

ad::Var conditional_ce(const HeadVars& head, PredicateId gt_predicate,
                       const LabelSpace& space) {
  const SuperCategoryId s = space.super_of(gt_predicate);
  const int within = space.index_within_super(gt_predicate);
  return cross_entropy_from_logits(head.cond_logits.at(static_cast<std::size_t>(s.v)),
                                   within);
}

ad::Var connectivity_bce(ad::Var conn_logit, int gt_connected) {
  if (gt_connected != 0 && gt_connected != 1)
    throw Error("connectivity_bce: label must be 0 or 1");
  // -log sigmoid(z) = softplus(-z); -log(1 - sigmoid(z)) = softplus(z).
  return ad::softplus(gt_connected == 1 ? ad::neg(conn_logit) : conn_logit);
}

ad::Var flat_ce(const FlatVars& flat, PredicateId gt_predicate) {
  if (gt_predicate.v < 0 || gt_predicate.v >= flat.logits.rows())
    throw Error("flat_ce: predicate id out of range");
  return cross_entropy_from_logits(flat.logits, gt_predicate.v);
}

ad::Var contrastive_loss(ad::Tape& tape, std::span<const ad::Var> hidden,
                         std::span<const int> labels, double temperature,
                         ContrastiveResult* result) {
  if (hidden.size() != labels.size())
    throw ShapeError("contrastive_loss: hidden/label count mismatch");
  if (hidden.size() < 2) throw Error("contrastive_loss: batch size must be >= 2");
  if (!(temperature > 0.0)) throw Error("contrastive_loss: temperature must be > 0");

  ContrastiveResult res;
  std::vector<ad::Var> anchor_terms;
  const int n = static_cast<int>(hidden.size());
  for (int a = 0; a < n; ++a) {
    std::vector<int> pos, neg;
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      (labels[static_cast<std::size_t>(b)] == labels[static_cast<std::size_t>(a)] ? pos : neg)
          .push_back(b);
    }
    if (pos.empty() || neg.empty()) {
      ++res.anchors_skipped;
      continue;
    }
    std::vector<ad::Var> neg_dots;
    neg_dots.reserve(neg.size());
    for (int b : neg)
      neg_dots.push_back(ad::scale(
          ad::dot(hidden[static_cast<std::size_t>(a)], hidden[static_cast<std::size_t>(b)]),
          1.0 / temperature));
    ad::Var lse = ad::logsumexp(ad::concat(neg_dots));
    ad::Var pos_sum =
        ad::dot(hidden[static_cast<std::size_t>(a)], hidden[static_cast<std::size_t>(pos[0])]);
    for (std::size_t i = 1; i < pos.size(); ++i)
      pos_sum = ad::add(pos_sum, ad::dot(hidden[static_cast<std::size_t>(a)],
                                         hidden[static_cast<std::size_t>(pos[i])]));
    anchor_terms.push_back(ad::sub(
        lse, ad::scale(pos_sum, 1.0 / (temperature * static_cast<double>(pos.size())))));
    ++res.anchors_used;
  }
  ad::Var out;
  if (anchor_terms.empty()) {
    out = tape.scalar_input(0.0);
  } else {
    ad::Var total = anchor_terms[0];
    for (std::size_t i = 1; i < anchor_terms.size(); ++i)
      total = ad::add(total, anchor_terms[i]);
    out = ad::scale(total, 1.0 / static_cast<double>(anchor_terms.size()));
    res.value = out.scalar();
    res.valid = true;
  }
  if (result != nullptr) *result = res;
  return out;
}

}  // namespace hsg
