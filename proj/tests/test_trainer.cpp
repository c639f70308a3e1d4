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
#include "hsg/trainer.hpp"

#include <cmath>

#include "doctest.h"
#include "test_helpers.hpp"

using namespace hsg;

namespace {

SyntheticSpec small_spec(std::uint64_t seed, double noise = 0.25) {
  SyntheticSpec spec;
  spec.num_images = 40;
  spec.min_nodes = 4;
  spec.max_nodes = 4;
  spec.hidden_dim = 16;
  spec.num_supers = 3;
  spec.predicates_per_super = 2;
  spec.grid_channels = 6;
  spec.grid_height = 8;
  spec.grid_width = 8;
  spec.num_object_categories = 5;
  spec.noise = noise;
  spec.super_noise = noise;
  spec.class_skew = 1.0;
  spec.seed = seed;
  spec.train_fraction = 0.75;
  return spec;
}

TrainConfig desk_config(int epochs = 12) {
  TrainConfig c;
  c.learning_rate = 0.08;
  c.batch_size = 4;
  c.epochs = epochs;
  c.lr_step_epochs = {epochs > 2 ? epochs - 1 : 2};
  c.temperature = 4.0;
  c.weights.contrastive = 0.02;
  c.hidden_dim = 16;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("lr schedule: decay applied exactly at the configured boundaries") {
  TrainConfig c;
  c.learning_rate = 1e-5;
  c.lr_decay_factor = 0.1;
  c.lr_step_epochs = {3};
  CHECK(c.lr_at_epoch(1) == 1e-5);
  CHECK(c.lr_at_epoch(2) == 1e-5);
  CHECK(c.lr_at_epoch(3) == doctest::Approx(1e-6).epsilon(1e-15));
  CHECK(c.lr_at_epoch(9) == doctest::Approx(1e-6).epsilon(1e-15));

  c.lr_step_epochs = {2, 4};
  CHECK(c.lr_at_epoch(1) == 1e-5);
  CHECK(c.lr_at_epoch(2) == doctest::Approx(1e-6));
  CHECK(c.lr_at_epoch(3) == doctest::Approx(1e-6));
  CHECK(c.lr_at_epoch(4) == doctest::Approx(1e-7));
  CHECK(c.lr_at_epoch(4) == c.learning_rate * std::pow(c.lr_decay_factor, 2));
}

TEST_CASE("lr = 0 leaves parameters exactly at their initialization") {
  const SyntheticData data = generate_synthetic(small_spec(21));
  GridStore grids = GridStore::in_memory(data.grids);
  TrainConfig cfg = desk_config(2);
  cfg.learning_rate = 0.0;
  const TrainResult result = train(data.train, grids, data.space, cfg);

  // Reconstruct the seeded initialization.
  Rng rng(cfg.seed);
  const int in_dim = assembly_input_dim(6, data.space);
  const AssemblyParams ap = AssemblyParams::init(in_dim, cfg.hidden_dim, rng);
  const HeadParams hp = HeadParams::init(cfg.hidden_dim, data.space, rng);
  CHECK(result.checkpoint.assembly.w_proj == ap.w_proj);
  CHECK(result.checkpoint.bayes_params.w_conn == hp.w_conn);
  CHECK(result.checkpoint.bayes_params.w_sup == hp.w_sup);
  for (std::size_t s = 0; s < hp.w_sub.size(); ++s)
    CHECK(result.checkpoint.bayes_params.w_sub[s] == hp.w_sub[s]);
}

TEST_CASE("one SGD step equals lr times the finite-difference batch gradient") {
  SyntheticSpec spec = small_spec(31);
  spec.num_images = 4;
  spec.train_fraction = 0.9;  // 3 train images, 6 positives
  const SyntheticData data = generate_synthetic(spec);
  GridStore grids = GridStore::in_memory(data.grids);

  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 64;  // everything in one batch
  cfg.epochs = 1;
  cfg.negative_ratio = 0.0;  // keep the loss a pure function of parameters
  cfg.temperature = 0.5;
  cfg.hidden_dim = 10;
  cfg.seed = 7;

  // Initialization replica.
  Rng rng(cfg.seed);
  const int in_dim = assembly_input_dim(spec.grid_channels, data.space);
  const AssemblyParams ap0 = AssemblyParams::init(in_dim, cfg.hidden_dim, rng);
  const HeadParams hp0 = HeadParams::init(cfg.hidden_dim, data.space, rng);

  const TrainResult result = train(data.train, grids, data.space, cfg);

  // The batch loss as a plain (tape-free) function of the parameters.
  auto batch_loss = [&](const AssemblyParams& ap, const HeadParams& hp) {
    double sup = 0.0, cond = 0.0, conn = 0.0;
    std::vector<Vector> hidden;
    std::vector<int> labels;
    int n = 0;
    for (const ImageRecord& img : data.train.images) {
      const FeatureGrid& grid = data.grids.at(img.id);
      for (const GtEdge& e : img.edges) {
        const EdgeContext ctx = assemble_edge(
            grid, img.nodes[static_cast<std::size_t>(e.subject)].box,
            img.nodes[static_cast<std::size_t>(e.object)].box,
            img.nodes[static_cast<std::size_t>(e.subject)].category,
            img.nodes[static_cast<std::size_t>(e.object)].category, data.space, ap);
        const EdgePrediction pred =
            head_forward(ctx.hidden, hp, data.space, HeadMode::bayes_consistent);
        sup += supercat_ce(pred, data.space.super_of(e.predicate));
        cond += conditional_ce(pred, e.predicate, data.space);
        conn += connectivity_bce(pred.connectivity, 1);
        hidden.push_back(ctx.hidden);
        labels.push_back(e.predicate.v);
        ++n;
      }
    }
    const double contrastive =
        contrastive_loss(hidden, labels, cfg.temperature).value;
    return sup / n + cond / n + conn / n + contrastive;
  };

  const double eps = 1e-6;
  double worst = 0.0;
  auto check_block = [&](const Matrix& before, const Matrix& after,
                         auto&& loss_with_entry, int max_entries) {
    int checked = 0;
    for (Eigen::Index r = 0; r < before.rows() && checked < max_entries; ++r) {
      for (Eigen::Index c = 0; c < before.cols() && checked < max_entries; ++c, ++checked) {
        const double observed = (before(r, c) - after(r, c)) / cfg.learning_rate;
        const double fd =
            (loss_with_entry(r, c, eps) - loss_with_entry(r, c, -eps)) / (2 * eps);
        worst = std::max(worst, std::abs(observed - fd) / std::max(1.0, std::abs(fd)));
      }
    }
  };

  check_block(ap0.w_proj, result.checkpoint.assembly.w_proj,
              [&](Eigen::Index r, Eigen::Index c, double d) {
                AssemblyParams ap = ap0;
                ap.w_proj(r, c) += d;
                return batch_loss(ap, hp0);
              },
              12);
  check_block(hp0.w_conn, result.checkpoint.bayes_params.w_conn,
              [&](Eigen::Index r, Eigen::Index c, double d) {
                HeadParams hp = hp0;
                hp.w_conn(r, c) += d;
                return batch_loss(ap0, hp);
              },
              10);
  check_block(hp0.w_sup, result.checkpoint.bayes_params.w_sup,
              [&](Eigen::Index r, Eigen::Index c, double d) {
                HeadParams hp = hp0;
                hp.w_sup(r, c) += d;
                return batch_loss(ap0, hp);
              },
              12);
  check_block(hp0.w_sub[0], result.checkpoint.bayes_params.w_sub[0],
              [&](Eigen::Index r, Eigen::Index c, double d) {
                HeadParams hp = hp0;
                hp.w_sub[0](r, c) += d;
                return batch_loss(ap0, hp);
              },
              8);
  CHECK(worst <= 1e-4);
}

TEST_CASE("training reduces the epoch mean loss on synthetic data") {
  const SyntheticData data = generate_synthetic(small_spec(41));
  GridStore grids = GridStore::in_memory(data.grids);
  const TrainResult result = train(data.train, grids, data.space, desk_config());
  CHECK(result.epoch_mean_loss_last < result.epoch_mean_loss_first);
  CHECK(std::isfinite(result.epoch_mean_loss_last));
}

TEST_CASE("identical seeds give bitwise-identical checkpoints") {
  const SyntheticData data = generate_synthetic(small_spec(51));
  GridStore g1 = GridStore::in_memory(data.grids);
  GridStore g2 = GridStore::in_memory(data.grids);
  const TrainConfig cfg = desk_config();
  const TrainResult a = train(data.train, g1, data.space, cfg);
  const TrainResult b = train(data.train, g2, data.space, cfg);
  CHECK(a.checkpoint.assembly.w_proj == b.checkpoint.assembly.w_proj);
  CHECK(a.checkpoint.bayes_params.w_conn == b.checkpoint.bayes_params.w_conn);
  CHECK(a.checkpoint.bayes_params.w_sup == b.checkpoint.bayes_params.w_sup);
  for (std::size_t s = 0; s < a.checkpoint.bayes_params.w_sub.size(); ++s)
    CHECK(a.checkpoint.bayes_params.w_sub[s] == b.checkpoint.bayes_params.w_sub[s]);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i)
    CHECK(a.history[i].total == b.history[i].total);
}

TEST_CASE("noise-free synthetic: trained PredCLS R@20 is near-perfect, untrained is not") {
  const SyntheticData data = generate_synthetic(small_spec(61, /*noise=*/0.0));
  GridStore grids = GridStore::in_memory(data.grids);
  TrainConfig cfg = desk_config(60);
  const TrainResult result = train(data.train, grids, data.space, cfg);

  EvalOptions options;
  options.ks = {20};
  const TaskReport trained = evaluate_checkpoint(result.checkpoint, data.test, grids,
                                                 data.space, Task::predcls, options);
  REQUIRE(trained.at_k.size() == 1);
  REQUIRE(trained.at_k[0].recall.has_value());
  CHECK(*trained.at_k[0].recall >= 0.95);

  // Untrained parameters from a different seed stay near chance.
  Checkpoint random_ckpt = result.checkpoint;
  Rng rng(12345);
  random_ckpt.assembly =
      AssemblyParams::init(assembly_input_dim(6, data.space), cfg.hidden_dim, rng);
  random_ckpt.bayes_params = HeadParams::init(cfg.hidden_dim, data.space, rng);
  const TaskReport untrained = evaluate_checkpoint(random_ckpt, data.test, grids,
                                                   data.space, Task::predcls, options);
  CHECK(*untrained.at_k[0].recall < *trained.at_k[0].recall);
  CHECK(*untrained.at_k[0].recall < 0.8);
}

TEST_CASE("single-super hierarchy: bayes pipeline equals the flat pipeline") {
  SyntheticSpec spec = small_spec(71);
  spec.num_supers = 1;
  spec.predicates_per_super = 5;
  const SyntheticData data = generate_synthetic(spec);
  GridStore grids = GridStore::in_memory(data.grids);
  TrainConfig cfg = desk_config(4);
  const TrainResult result = train(data.train, grids, data.space, cfg);

  Checkpoint flat = result.checkpoint;
  flat.head = HeadKind::flat;
  flat.flat_params.w_conn = result.checkpoint.bayes_params.w_conn;
  flat.flat_params.w_flat = result.checkpoint.bayes_params.w_sub[0];

  EvalOptions options;
  options.ks = {1, 5, 20};
  for (Task task : {Task::predcls, Task::sgcls, Task::sgdet}) {
    const TaskReport a =
        evaluate_checkpoint(result.checkpoint, data.test, grids, data.space, task, options);
    const TaskReport b =
        evaluate_checkpoint(flat, data.test, grids, data.space, task, options);
    for (std::size_t i = 0; i < options.ks.size(); ++i) {
      CHECK(std::abs(*a.at_k[i].recall - *b.at_k[i].recall) <= 1e-9);
      CHECK(std::abs(*a.at_k[i].mean_recall - *b.at_k[i].mean_recall) <= 1e-9);
    }
  }
}

TEST_CASE("evaluation with workers matches single-threaded evaluation") {
  const SyntheticData data = generate_synthetic(small_spec(81));
  GridStore grids = GridStore::in_memory(data.grids);
  TrainConfig cfg = desk_config(3);
  const TrainResult result = train(data.train, grids, data.space, cfg);

  EvalOptions serial;
  serial.ks = {5, 20};
  EvalOptions parallel = serial;
  parallel.workers = 4;
  const TaskReport a = evaluate_checkpoint(result.checkpoint, data.test, grids,
                                           data.space, Task::predcls, serial);
  const TaskReport b = evaluate_checkpoint(result.checkpoint, data.test, grids,
                                           data.space, Task::predcls, parallel);
  for (std::size_t i = 0; i < serial.ks.size(); ++i) {
    CHECK(*a.at_k[i].recall == *b.at_k[i].recall);
    CHECK(*a.at_k[i].mean_recall == *b.at_k[i].mean_recall);
  }
}

TEST_CASE("a diverging run aborts with a numeric error") {
  const SyntheticData data = generate_synthetic(small_spec(91));
  GridStore grids = GridStore::in_memory(data.grids);
  TrainConfig cfg = desk_config(3);
  cfg.learning_rate = 1e140;
  CHECK_THROWS_AS(train(data.train, grids, data.space, cfg), NumericError);
}

TEST_CASE("history CSV has one row per step") {
  const SyntheticData data = generate_synthetic(small_spec(95));
  GridStore grids = GridStore::in_memory(data.grids);
  TrainConfig cfg = desk_config(2);
  const TrainResult result = train(data.train, grids, data.space, cfg);
  const auto dir = hsg_test::temp_dir("history");
  write_history_csv(result.history, dir / "h.csv");
  const std::string text = hsg_test::read_file(dir / "h.csv");
  std::size_t lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  CHECK(lines == result.history.size() + 1);
}
