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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hsg/eval.hpp"
#include "hsg/feature_grid.hpp"
#include "hsg/hierarchy.hpp"

namespace hsg {

struct DetectionRecord {
  BoundingBox box;
  ObjectCategoryId label;
  double score = 1.0;
};

struct ImageRecord {
  std::string id;
  int width = 1;
  int height = 1;
  std::string grid_path;  // relative to the manifest, empty if none
  std::vector<GtNode> nodes;
  std::vector<GtEdge> edges;
  std::vector<DetectionRecord> detections;
  bool no_relationships = false;

  SceneGraphGT gt() const { return SceneGraphGT{nodes, edges}; }
};

struct DatasetManifest {
  std::string split;  // "train" or "test"
  std::string hierarchy_path;
  std::string config_json = "{}";  // echo of the generating configuration
  std::vector<ImageRecord> images;

  void validate(const LabelSpace& space) const;
  void save(const std::filesystem::path& path) const;
  static DatasetManifest load(const std::filesystem::path& path);
};

/// Loads and caches feature grids referenced by manifest records; can also be
/// seeded in memory (synthetic data, tests).
class GridStore {
 public:
  explicit GridStore(std::filesystem::path base_dir) : base_(std::move(base_dir)) {}
  static GridStore in_memory(std::map<std::string, FeatureGrid> grids);

  const FeatureGrid& get(const ImageRecord& record);

 private:
  GridStore() = default;
  std::filesystem::path base_;
  std::map<std::string, FeatureGrid> cache_;
};

// ---------------------------------------------------------------------------
// Visual-Genome-style annotation ingestion.
// ---------------------------------------------------------------------------

struct VgParseStats {
  int images = 0;
  int objects_kept = 0;
  int objects_dropped_vocab = 0;
  int objects_dropped_degenerate = 0;
  int edges_kept = 0;
  int edges_dropped_vocab = 0;
  int edges_dropped_filtered_node = 0;
  int edges_dropped_duplicate = 0;
  int images_empty = 0;
};

/// Parses the documented subset of the public VG annotation schema: an
/// objects file ([{image_id, width, height, objects: [{object_id, names,
/// x, y, w, h}]}]) and a relationships file ([{image_id, relationships:
/// [{predicate, subject: {object_id}, object: {object_id}}]}]). Objects and
/// relationships outside the vocabularies are dropped and counted; boxes are
/// normalized by image size. Structural problems (unknown object_id, missing
/// image) are errors.
DatasetManifest parse_vg_annotations(const std::filesystem::path& objects_file,
                                     const std::filesystem::path& relationships_file,
                                     const LabelSpace& space,
                                     VgParseStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Synthetic data with a planted label hierarchy.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  int num_images = 1100;
  int min_nodes = 4;
  int max_nodes = 6;
  int hidden_dim = 48;          // EdgeContext dimension used downstream
  int num_supers = 3;
  int predicates_per_super = 6;
  double margin = 1.0;          // within-super mean distance <= margin,
                                // cross-super >= 3 * margin
  double noise = 0.2;           // stddev of the per-edge context noise
  double super_noise = 2.5;     // stddev along the super-category center
                                // directions; < 0 means same as `noise`.
                                // Deliberately large so that super-category
                                // membership is ambiguous per edge while the
                                // detailed class stays well determined.
  std::uint64_t seed = 7;

  // Plumbing knobs.
  int grid_channels = 12;
  int grid_height = 8;
  int grid_width = 8;
  int num_object_categories = 10;
  double class_skew = 0.5;      // geometric decay of within-super sampling
  double detection_label_flip = 0.1;
  double detection_box_jitter = 0.03;
  double train_fraction = 0.8;

  void validate() const;
  std::string to_json() const;
  static SyntheticSpec from_json(const std::string& text);
  static SyntheticSpec load(const std::filesystem::path& path);
};

struct SyntheticData {
  LabelSpace space;
  DatasetManifest train;
  DatasetManifest test;
  std::map<std::string, FeatureGrid> grids;
  TripletSet train_triplets;
  Matrix class_means;  // (2 * grid_channels) x |predicates|
};

/// Deterministic in the spec (including the seed). Every relationship class
/// gets a class-conditional mean in pooled-feature space with the margin
/// geometry above; edge contexts are mean + Gaussian noise and are painted
/// into the grids so that masked mean-pooling recovers them exactly.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Writes manifests, grids, hierarchy, and the train-triplet file under dir.
void write_synthetic(const SyntheticData& data, const SyntheticSpec& spec,
                     const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// External predictions and triplet sets.
// ---------------------------------------------------------------------------

struct ExternalPrediction {
  std::string image_id;
  int subject = -1;
  int object = -1;
  EdgePrediction prediction;
};

/// JSON-lines records {image, subject, object, connectivity, super_probs,
/// conditional_probs}. Probability vectors off by at most 1e-6 are
/// renormalized; anything worse is rejected.
std::vector<ExternalPrediction> load_external_logits(const std::filesystem::path& path,
                                                     const LabelSpace& space);

void save_triplets(const TripletSet& triplets, const LabelSpace& space,
                   const std::filesystem::path& path);
TripletSet load_triplets(const std::filesystem::path& path, const LabelSpace& space);

}  // namespace hsg
