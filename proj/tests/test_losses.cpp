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

#include <array>
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace hsg;

namespace {

EdgePrediction prediction_with_super(const Vector& super, const LabelSpace& space) {
  EdgePrediction pred;
  pred.mode = HeadMode::bayes_consistent;
  pred.connectivity = 0.5;
  pred.super_probs = super;
  for (int s = 0; s < space.num_supers(); ++s) {
    const auto n = static_cast<Eigen::Index>(space.predicates_in(SuperCategoryId(s)).size());
    pred.conditional_probs.push_back(Vector::Constant(n, 1.0 / static_cast<double>(n)));
  }
  pred.joint_probs = Vector::Zero(space.num_predicates());
  for (int p = 0; p < space.num_predicates(); ++p) {
    const SuperCategoryId s = space.super_of(PredicateId(p));
    pred.joint_probs[p] =
        super[s.v] * pred.conditional_probs[static_cast<std::size_t>(s.v)][space.index_within_super(PredicateId(p))];
  }
  return pred;
}

}  // namespace

TEST_CASE("supercat_ce: certainty, uniform, frozen -ln 0.3") {
  const LabelSpace space = hsg_test::tiny_space();
  EdgePrediction sure = prediction_with_super((Vector(3) << 1.0, 0.0, 0.0).finished(), space);
  CHECK(supercat_ce(sure, SuperCategoryId(0)) == doctest::Approx(0.0).epsilon(1e-12));

  EdgePrediction uniform =
      prediction_with_super(Vector::Constant(3, 1.0 / 3.0), space);
  for (int s = 0; s < 3; ++s)
    CHECK(supercat_ce(uniform, SuperCategoryId(s)) ==
          doctest::Approx(1.0986122886681098).epsilon(1e-12));  // ln 3

  EdgePrediction skewed =
      prediction_with_super((Vector(3) << 0.6, 0.3, 0.1).finished(), space);
  CHECK(supercat_ce(skewed, SuperCategoryId(1)) ==
        doctest::Approx(1.2039728043259361).epsilon(1e-12));  // -ln 0.3
}

TEST_CASE("conditional_ce: certainty, uniform over 15, oracle case") {
  // One super-category holding 15 predicates.
  std::vector<std::string> preds;
  std::map<std::string, std::string> assign;
  for (int i = 0; i < 15; ++i) {
    preds.push_back("p" + std::to_string(i));
    assign[preds.back()] = "all";
  }
  const LabelSpace space = LabelSpace::build({"o"}, preds, {"all"}, assign);

  EdgePrediction pred;
  pred.mode = HeadMode::bayes_consistent;
  pred.connectivity = 0.5;
  pred.super_probs = Vector::Ones(1);
  pred.conditional_probs = {Vector::Constant(15, 1.0 / 15.0)};
  pred.joint_probs = pred.conditional_probs[0];
  CHECK(conditional_ce(pred, PredicateId(7), space) ==
        doctest::Approx(2.70805020110221).epsilon(1e-12));  // ln 15

  pred.conditional_probs[0] = Vector::Zero(15);
  pred.conditional_probs[0][7] = 1.0;
  CHECK(conditional_ce(pred, PredicateId(7), space) == doctest::Approx(0.0));

  // Fixed small case against long double arithmetic.
  const LabelSpace tiny = hsg_test::tiny_space();
  EdgePrediction p2 = prediction_with_super((Vector(3) << 0.2, 0.5, 0.3).finished(), tiny);
  p2.conditional_probs[2] = (Vector(2) << 0.85, 0.15).finished();
  const long double expect = -std::log(0.15L);
  CHECK(conditional_ce(p2, PredicateId(4), tiny) ==
        doctest::Approx(static_cast<double>(expect)).epsilon(1e-12));
}

TEST_CASE("connectivity_bce: ln 2 at 0.5, zero at certainty, frozen -ln 0.1") {
  CHECK(connectivity_bce(0.5, 0) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(connectivity_bce(0.5, 1) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(connectivity_bce(1.0, 1) == doctest::Approx(0.0));
  CHECK(connectivity_bce(0.0, 0) == doctest::Approx(0.0));
  CHECK(connectivity_bce(0.9, 0) ==
        doctest::Approx(2.302585092994046).epsilon(1e-12));  // -ln 0.1
  CHECK_THROWS(connectivity_bce(0.5, 2));
}

TEST_CASE("contrastive: two same-class vectors leave no valid anchor") {
  const std::vector<Vector> hidden = {Vector::Ones(3), Vector::Ones(3)};
  const std::vector<int> labels = {4, 4};
  const ContrastiveResult res = contrastive_loss(hidden, labels, 1.0);
  CHECK_FALSE(res.valid);
  CHECK(res.value == 0.0);
  CHECK(res.anchors_skipped == 2);
}

TEST_CASE("contrastive: hand-set dot products give -5 per the stated formula") {
  // a1.a2 = 5, a1.c = 0, a2.c = 0; anchors a1 and a2 each see one positive
  // (dot 5 resp. 5) and one negative (dot 0).
  const std::vector<Vector> hidden = {(Vector(3) << 5, 0, 0).finished(),
                                      (Vector(3) << 1, 0, 0).finished(),
                                      (Vector(3) << 0, 1, 0).finished()};
  const std::vector<int> labels = {0, 0, 1};
  const ContrastiveResult res = contrastive_loss(hidden, labels, 1.0);
  CHECK(res.valid);
  CHECK(res.anchors_used == 2);
  CHECK(res.anchors_skipped == 1);  // c has no positive
  CHECK(res.value == doctest::Approx(-5.0).epsilon(1e-12));
}

TEST_CASE("contrastive: tau to infinity approaches the zero-logit value") {
  Rng rng(7);
  std::vector<Vector> hidden;
  std::vector<int> labels = {0, 0, 1, 1};
  for (int i = 0; i < 4; ++i) hidden.push_back(rng.normal_vector(5));
  const double at_huge_tau = contrastive_loss(hidden, labels, 1e9).value;
  // Zero logits: every anchor contributes log(sum over N of e^0) = log |N|.
  const double zero_logit_value = std::log(2.0);
  CHECK(at_huge_tau == doctest::Approx(zero_logit_value).epsilon(1e-6));
}

TEST_CASE("contrastive can be negative; only finiteness is asserted") {
  const std::vector<Vector> hidden = {(Vector(2) << 3, 0).finished(),
                                      (Vector(2) << 3, 0).finished(),
                                      (Vector(2) << -3, 0).finished()};
  const std::vector<int> labels = {0, 0, 1};
  const ContrastiveResult res = contrastive_loss(hidden, labels, 1.0);
  CHECK(res.value < 0.0);
  CHECK(std::isfinite(res.value));
}

TEST_CASE("clustered embeddings beat label-shuffled embeddings on average") {
  Rng rng(19);
  std::vector<Vector> hidden;
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c) {
    Vector unit = Vector::Zero(6);
    unit[c] = 1.0;
    for (int rep = 0; rep < 3; ++rep) {
      hidden.push_back(unit);
      labels.push_back(c);
    }
  }
  const double clustered = contrastive_loss(hidden, labels, 0.5).value;
  double shuffled_sum = 0.0;
  const int shuffles = 12;
  for (int s = 0; s < shuffles; ++s) {
    std::vector<int> perm = labels;
    rng.shuffle(perm);
    shuffled_sum += contrastive_loss(hidden, perm, 0.5).value;
  }
  CHECK(clustered < shuffled_sum / shuffles);
}

TEST_CASE("total_loss: zero weights, single term, weighted sum") {
  const LossTerms terms{1.5, 2.5, -0.5, 0.25};
  CHECK(total_loss(terms, LossWeights{0, 0, 0, 0}) == 0.0);
  CHECK(total_loss(terms, LossWeights{0, 1, 0, 0}) == doctest::Approx(2.5));
  CHECK(total_loss(terms, LossWeights{1, 1, 1, 1}) == doctest::Approx(3.75));
  CHECK_THROWS(total_loss(terms, LossWeights{-1, 0, 0, 0}));
}

TEST_CASE("tape losses agree with the plain losses on random heads") {
  const LabelSpace space = hsg_test::tiny_space();
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const HeadParams params = HeadParams::init(7, space, rng);
    const Vector x = rng.normal_vector(7, 1.5);
    const PredicateId gt(rng.uniform_int(space.num_predicates()));
    for (HeadMode mode : {HeadMode::bayes_consistent, HeadMode::literal_eq3}) {
      const EdgePrediction plain = head_forward(x, params, space, mode);
      ad::Tape tape;
      const HeadVars h = head_forward(tape.input(x), lift(tape, params), space, mode);
      CHECK(supercat_ce(h, space.super_of(gt)).scalar() ==
            doctest::Approx(supercat_ce(plain, space.super_of(gt))).epsilon(1e-12));
      CHECK(conditional_ce(h, gt, space).scalar() ==
            doctest::Approx(conditional_ce(plain, gt, space)).epsilon(1e-12));
      CHECK(connectivity_bce(h.conn_logit, 1).scalar() ==
            doctest::Approx(connectivity_bce(plain.connectivity, 1)).epsilon(1e-9));
    }
  }
  // Tape contrastive against the plain value.
  std::vector<Vector> hidden;
  std::vector<int> labels = {0, 1, 0, 2};
  for (int i = 0; i < 4; ++i) hidden.push_back(rng.normal_vector(5));
  const double plain_value = contrastive_loss(hidden, labels, 0.1).value;
  ad::Tape tape;
  std::vector<ad::Var> hv;
  for (const Vector& h : hidden) hv.push_back(tape.input(h));
  ContrastiveResult stats;
  const ad::Var v = contrastive_loss(tape, hv, labels, 0.1, &stats);
  CHECK(stats.valid);
  CHECK(v.scalar() == doctest::Approx(plain_value).epsilon(1e-12));
}

TEST_CASE("every tape loss passes grad_check") {
  const LabelSpace space = hsg_test::tiny_space();
  Rng rng(31);
  const int d = 6;
  for (HeadMode mode : {HeadMode::bayes_consistent, HeadMode::literal_eq3}) {
    const HeadParams init = HeadParams::init(d, space, rng);
    std::vector<Matrix> leaves = {rng.normal_vector(d), init.w_conn, init.w_sup};
    for (const Matrix& w : init.w_sub) leaves.push_back(w);
    const double err = ad::grad_check(
        leaves,
        [&space, mode](ad::Tape&, std::span<const ad::Var> ls) {
          HeadParamVars vars;
          vars.conn = ls[1];
          vars.sup = ls[2];
          for (std::size_t i = 3; i < ls.size(); ++i) vars.sub.push_back(ls[i]);
          const HeadVars h = head_forward(ls[0], vars, space, mode);
          ad::Var loss = supercat_ce(h, SuperCategoryId(1));
          loss = ad::add(loss, conditional_ce(h, PredicateId(3), space));
          loss = ad::add(loss, connectivity_bce(h.conn_logit, 1));
          loss = ad::add(loss, connectivity_bce(h.conn_logit, 0));
          return loss;
        },
        1e-6);
    CHECK(err <= 1e-4);
  }
  // Contrastive gradient.
  std::vector<Matrix> leaves;
  for (int i = 0; i < 4; ++i) leaves.push_back(rng.normal_vector(5));
  const std::vector<int> labels = {0, 0, 1, 2};
  const double err = ad::grad_check(
      leaves,
      [&labels](ad::Tape& t, std::span<const ad::Var> ls) {
        std::vector<ad::Var> hidden(ls.begin(), ls.end());
        return contrastive_loss(t, hidden, labels, 0.5);
      },
      1e-6);
  CHECK(err <= 1e-4);
}

TEST_CASE("conditional_ce gradient is exactly zero outside the GT super (bayes mode)") {
  const LabelSpace space = hsg_test::tiny_space();
  Rng rng(37);
  const HeadParams params = HeadParams::init(6, space, rng);
  const PredicateId gt(3);  // super "sem" (index 2)

  ad::Tape tape;
  const HeadParamVars vars = lift(tape, params);
  const HeadVars h =
      head_forward(tape.input(rng.normal_vector(6)), vars, space, HeadMode::bayes_consistent);
  tape.backward(conditional_ce(h, gt, space));
  CHECK(vars.sub[0].grad().cwiseAbs().maxCoeff() == 0.0);
  CHECK(vars.sub[1].grad().cwiseAbs().maxCoeff() == 0.0);
  CHECK(vars.sub[2].grad().cwiseAbs().maxCoeff() > 0.0);
  // The super head receives no gradient from the conditional term either.
  CHECK(vars.sup.grad().cwiseAbs().maxCoeff() == 0.0);

  // literal_eq3 scales the logits by the super probability, so gradient does
  // flow into the super head there.
  ad::Tape tape2;
  const HeadParamVars vars2 = lift(tape2, params);
  const HeadVars h2 =
      head_forward(tape2.input(rng.normal_vector(6)), vars2, space, HeadMode::literal_eq3);
  tape2.backward(conditional_ce(h2, gt, space));
  CHECK(vars2.sup.grad().cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("plain loss clamps vanishing probabilities instead of returning inf") {
  const LabelSpace space = hsg_test::tiny_space();
  EdgePrediction pred = prediction_with_super((Vector(3) << 1.0, 0.0, 0.0).finished(), space);
  const double loss = supercat_ce(pred, SuperCategoryId(2));
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(-std::log(1e-12)));
}
