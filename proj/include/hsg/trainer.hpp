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

#include <optional>

#include "hsg/checkpoint.hpp"
#include "hsg/dataset.hpp"
#include "hsg/losses.hpp"

namespace hsg {

struct TrainConfig {
  double learning_rate = 1e-5;
  int batch_size = 16;
  int epochs = 3;
  double lr_decay_factor = 0.1;
  std::vector<int> lr_step_epochs = {3};  // 1-based epochs whose start applies decay
  LossWeights weights;
  double temperature = 0.1;
  HeadKind head = HeadKind::bayes;
  HeadMode mode = HeadMode::bayes_consistent;
  int hidden_dim = 512;
  double negative_ratio = 1.0;  // negative pairs per positive edge in a batch
  std::uint64_t seed = 1;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  static TrainConfig load(const std::filesystem::path& path);

  /// learning_rate * decay^(boundaries passed at or before 1-based epoch).
  double lr_at_epoch(int epoch) const;
};

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double lr = 0.0;
  LossTerms terms;
  double total = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> history;
  double epoch_mean_loss_first = 0.0;
  double epoch_mean_loss_last = 0.0;
};

/// Mini-batch SGD over the projection and head parameters. Deterministic for
/// a fixed config (parameter init, shuffling, and negative sampling all come
/// from one seeded stream). Aborts with a diagnostic on a non-finite loss.
TrainResult train(const DatasetManifest& manifest, GridStore& grids,
                  const LabelSpace& space, const TrainConfig& config);

void write_history_csv(const std::vector<StepRecord>& history,
                       const std::filesystem::path& path);

struct EvalOptions {
  std::vector<int> ks = {20, 50, 100};
  ScoreMode score_mode = ScoreMode::e_times_joint;
  double iou_threshold = 0.5;
  std::optional<TripletSet> train_triplets;
  int workers = 1;
};

/// Runs the head over every ordered entity pair of one image and returns the
/// full sorted candidate pool plus ground truth.
ImageForEval build_image_eval(const Checkpoint& ckpt, const ImageRecord& record,
                              const FeatureGrid& grid, const LabelSpace& space,
                              Task task, const EvalOptions& options,
                              bool* label_fallback = nullptr);

TaskReport evaluate_checkpoint(const Checkpoint& ckpt, const DatasetManifest& manifest,
                               GridStore& grids, const LabelSpace& space, Task task,
                               const EvalOptions& options);

/// Pools built from externally supplied predictions instead of a checkpoint.
/// Subject/object indices reference the task's entity list (GT nodes for
/// PredCLS/SGCLS, detections for SGDET).
std::vector<ImageForEval> images_from_external(
    const std::vector<ExternalPrediction>& records, const DatasetManifest& manifest,
    const LabelSpace& space, Task task, const EvalOptions& options,
    bool* label_fallback = nullptr);

}  // namespace hsg
