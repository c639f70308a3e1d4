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
#include "hsg/head.hpp"

#include <cmath>

#include "hsg/numeric.hpp"

namespace hsg {

namespace {

Matrix symmetric_init(int rows, int cols, int hidden_dim, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  return rng.uniform_matrix(rows, cols, -a, a);
}

void check_simplex(const Vector& v, double tol, const char* what) {
  if (v.size() == 0) throw ShapeError(std::string(what) + ": empty");
  if ((v.array() < 0.0).any() || (v.array() > 1.0 + tol).any())
    throw NumericError(std::string(what) + ": entries outside [0,1]");
  if (std::abs(v.sum() - 1.0) > tol)
    throw NumericError(std::string(what) + ": does not sum to 1");
}

}  // namespace

HeadParams HeadParams::init(int hidden_dim, const LabelSpace& space, Rng& rng) {
  HeadParams p;
  p.w_conn = symmetric_init(hidden_dim, 1, hidden_dim, rng);
  p.w_sup = symmetric_init(hidden_dim, space.num_supers(), hidden_dim, rng);
  for (int s = 0; s < space.num_supers(); ++s) {
    const int n = static_cast<int>(space.predicates_in(SuperCategoryId(s)).size());
    p.w_sub.push_back(symmetric_init(hidden_dim, n, hidden_dim, rng));
  }
  return p;
}

void HeadParams::validate(int hidden_dim, const LabelSpace& space) const {
  if (w_conn.rows() != hidden_dim || w_conn.cols() != 1)
    throw ShapeError("HeadParams: w_conn must be hidden_dim x 1");
  if (w_sup.rows() != hidden_dim || w_sup.cols() != space.num_supers())
    throw ShapeError("HeadParams: w_sup must be hidden_dim x S");
  if (static_cast<int>(w_sub.size()) != space.num_supers())
    throw ShapeError("HeadParams: one w_sub block per super-category");
  int covered = 0;
  for (int s = 0; s < space.num_supers(); ++s) {
    const int n = static_cast<int>(space.predicates_in(SuperCategoryId(s)).size());
    if (w_sub[s].rows() != hidden_dim || w_sub[s].cols() != n)
      throw ShapeError("HeadParams: w_sub[" + std::to_string(s) + "] shape mismatch");
    covered += n;
  }
  if (covered != space.num_predicates())
    throw ShapeError("HeadParams: sub blocks do not cover the predicate vocabulary");
}

FlatHeadParams FlatHeadParams::init(int hidden_dim, const LabelSpace& space, Rng& rng) {
  FlatHeadParams p;
  p.w_conn = symmetric_init(hidden_dim, 1, hidden_dim, rng);
  p.w_flat = symmetric_init(hidden_dim, space.num_predicates(), hidden_dim, rng);
  return p;
}

void FlatHeadParams::validate(int hidden_dim, const LabelSpace& space) const {
  if (w_conn.rows() != hidden_dim || w_conn.cols() != 1)
    throw ShapeError("FlatHeadParams: w_conn must be hidden_dim x 1");
  if (w_flat.rows() != hidden_dim || w_flat.cols() != space.num_predicates())
    throw ShapeError("FlatHeadParams: w_flat must be hidden_dim x |predicates|");
}

void EdgePrediction::validate(const LabelSpace& space, double tol) const {
  if (connectivity < 0.0 || connectivity > 1.0 || !std::isfinite(connectivity))
    throw NumericError("EdgePrediction: connectivity outside [0,1]");
  if (super_probs.size() != space.num_supers())
    throw ShapeError("EdgePrediction: super_probs size != S");
  check_simplex(super_probs, tol, "super_probs");
  if (static_cast<int>(conditional_probs.size()) != space.num_supers())
    throw ShapeError("EdgePrediction: one conditional per super-category");
  for (int s = 0; s < space.num_supers(); ++s) {
    if (conditional_probs[s].size() !=
        static_cast<Eigen::Index>(space.predicates_in(SuperCategoryId(s)).size()))
      throw ShapeError("EdgePrediction: conditional size mismatch");
    check_simplex(conditional_probs[s], tol, "conditional_probs");
  }
  if (joint_probs.size() != space.num_predicates())
    throw ShapeError("EdgePrediction: joint_probs size != |predicates|");
  if (mode == HeadMode::bayes_consistent && std::abs(joint_probs.sum() - 1.0) > tol)
    throw NumericError("EdgePrediction: joint does not sum to 1 in bayes_consistent mode");
}

EdgePrediction head_forward(const Vector& hidden, const HeadParams& params,
                            const LabelSpace& space, HeadMode mode) {
  if (hidden.size() != params.w_conn.rows())
    throw ShapeError("head_forward: hidden dim mismatch");
  params.validate(static_cast<int>(hidden.size()), space);
  require_finite(hidden, "head_forward");

  EdgePrediction pred;
  pred.mode = mode;
  pred.connectivity = sigmoid((params.w_conn.transpose() * hidden)(0, 0));
  pred.super_probs = softmax(params.w_sup.transpose() * hidden);

  pred.conditional_probs.resize(static_cast<std::size_t>(space.num_supers()));
  pred.joint_probs = Vector::Zero(space.num_predicates());
  for (int s = 0; s < space.num_supers(); ++s) {
    Vector logits = params.w_sub[s].transpose() * hidden;
    if (mode == HeadMode::literal_eq3) logits *= pred.super_probs[s];
    pred.conditional_probs[s] = softmax(logits);
    const auto& members = space.predicates_in(SuperCategoryId(s));
    for (std::size_t k = 0; k < members.size(); ++k)
      pred.joint_probs[members[k].v] =
          pred.super_probs[s] * pred.conditional_probs[s][static_cast<Eigen::Index>(k)];
  }
  return pred;
}

FlatPrediction flat_forward(const Vector& hidden, const FlatHeadParams& params) {
  if (hidden.size() != params.w_conn.rows())
    throw ShapeError("flat_forward: hidden dim mismatch");
  require_finite(hidden, "flat_forward");
  FlatPrediction pred;
  pred.connectivity = sigmoid((params.w_conn.transpose() * hidden)(0, 0));
  pred.probs = softmax(params.w_flat.transpose() * hidden);
  return pred;
}

double score_candidate(const EdgePrediction& pred, PredicateId p, ScoreMode mode,
                       const LabelSpace& space) {
  if (p.v < 0 || p.v >= pred.joint_probs.size())
    throw Error("score_candidate: predicate out of range");
  switch (mode) {
    case ScoreMode::e_times_joint:
      return pred.connectivity * pred.joint_probs[p.v];
    case ScoreMode::joint_only:
      return pred.joint_probs[p.v];
    case ScoreMode::e_times_super:
      return pred.connectivity * pred.super_probs[space.super_of(p).v];
  }
  throw Error("score_candidate: unknown mode");
}

std::vector<std::pair<PredicateId, double>> top_per_super(const EdgePrediction& pred,
                                                          const LabelSpace& space,
                                                          ScoreMode mode) {
  std::vector<std::pair<PredicateId, double>> out;
  out.reserve(static_cast<std::size_t>(space.num_supers()));
  for (int s = 0; s < space.num_supers(); ++s) {
    const auto& members = space.predicates_in(SuperCategoryId(s));
    PredicateId best = members.front();
    double best_joint = pred.joint_probs[best.v];
    for (const PredicateId p : members) {
      // Members are in ascending predicate order, so strict > ties to the
      // lowest index.
      if (pred.joint_probs[p.v] > best_joint) {
        best = p;
        best_joint = pred.joint_probs[p.v];
      }
    }
    out.emplace_back(best, score_candidate(pred, best, mode, space));
  }
  return out;
}

HeadParamVars lift(ad::Tape& tape, const HeadParams& params) {
  HeadParamVars v{tape.input(params.w_conn), tape.input(params.w_sup), {}};
  for (const Matrix& w : params.w_sub) v.sub.push_back(tape.input(w));
  return v;
}

HeadVars head_forward(ad::Var hidden, const HeadParamVars& params,
                      const LabelSpace& space, HeadMode mode) {
  HeadVars h;
  h.mode = mode;
  h.conn_logit = ad::linear(hidden, params.conn);
  h.connectivity = ad::sigmoid(h.conn_logit);
  h.super_logits = ad::linear(hidden, params.sup);
  h.super_probs = ad::softmax(h.super_logits);
  if (static_cast<int>(params.sub.size()) != space.num_supers())
    throw ShapeError("head_forward: sub-parameter count != S");
  for (int s = 0; s < space.num_supers(); ++s) {
    ad::Var logits = ad::linear(hidden, params.sub[static_cast<std::size_t>(s)]);
    h.sub_logits.push_back(logits);
    if (mode == HeadMode::literal_eq3)
      logits = ad::scale(logits, ad::pick(h.super_probs, s));
    h.cond_logits.push_back(logits);
    h.cond_probs.push_back(ad::softmax(logits));
  }
  return h;
}

EdgePrediction HeadVars::to_prediction(const LabelSpace& space) const {
  EdgePrediction pred;
  pred.mode = mode;
  pred.connectivity = connectivity.scalar();
  pred.super_probs = super_probs.value().col(0);
  pred.joint_probs = Vector::Zero(space.num_predicates());
  for (int s = 0; s < space.num_supers(); ++s) {
    pred.conditional_probs.push_back(cond_probs[static_cast<std::size_t>(s)].value().col(0));
    const auto& members = space.predicates_in(SuperCategoryId(s));
    for (std::size_t k = 0; k < members.size(); ++k)
      pred.joint_probs[members[k].v] =
          pred.super_probs[s] * pred.conditional_probs.back()[static_cast<Eigen::Index>(k)];
  }
  return pred;
}

FlatParamVars lift(ad::Tape& tape, const FlatHeadParams& params) {
  return FlatParamVars{tape.input(params.w_conn), tape.input(params.w_flat)};
}

FlatVars flat_forward(ad::Var hidden, const FlatParamVars& params) {
  FlatVars f;
  f.conn_logit = ad::linear(hidden, params.conn);
  f.connectivity = ad::sigmoid(f.conn_logit);
  f.logits = ad::linear(hidden, params.flat);
  f.probs = ad::softmax(f.logits);
  return f;
}

FlatPrediction FlatVars::to_prediction() const {
  FlatPrediction pred;
  pred.connectivity = connectivity.scalar();
  pred.probs = probs.value().col(0);
  return pred;
}

}  // namespace hsg
