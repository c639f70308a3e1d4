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

#include "hsg/feature_grid.hpp"
#include "hsg/hierarchy.hpp"
#include "hsg/rng.hpp"
#include "hsg/tape.hpp"

namespace hsg {

/// Hidden state of one directed edge; the (subject, object) argument order
/// of assemble_edge encodes the direction.
struct EdgeContext {
  Vector hidden;
  ObjectCategoryId subject_category;
  ObjectCategoryId object_category;
};

/// The trainable reduction from pooled features + one-hots to the hidden
/// vector. w_proj is (input_dim x hidden_dim).
struct AssemblyParams {
  Matrix w_proj;

  static AssemblyParams init(int input_dim, int hidden_dim, Rng& rng);
  int input_dim() const { return static_cast<int>(w_proj.rows()); }
  int hidden_dim() const { return static_cast<int>(w_proj.cols()); }
};

/// Length of the pre-projection vector: two pooled feature blocks (subject
/// then object; the order encodes edge direction) followed by one-hots for
/// subject category, subject super-category, object category, object
/// super-category.
int assembly_input_dim(int grid_channels, const LabelSpace& space);

/// Pooled-and-concatenated input for one directed edge. Frozen with respect
/// to training: gradients stop at the projection.
Vector edge_input(const FeatureGrid& grid, const BoundingBox& subject_box,
                  const BoundingBox& object_box, ObjectCategoryId subject_cat,
                  ObjectCategoryId object_cat, const LabelSpace& space);

EdgeContext assemble_edge(const FeatureGrid& grid, const BoundingBox& subject_box,
                          const BoundingBox& object_box, ObjectCategoryId subject_cat,
                          ObjectCategoryId object_cat, const LabelSpace& space,
                          const AssemblyParams& params);

/// Tape variant used in training: masking, pooling, concatenation and the
/// projection are all recorded, so the projection weights receive exact
/// gradients. `grid_leaf` is the grid's value matrix already on the tape.
ad::Var assemble_edge(ad::Tape& tape, ad::Var grid_leaf, int grid_height,
                      int grid_width, const BoundingBox& subject_box,
                      const BoundingBox& object_box, ObjectCategoryId subject_cat,
                      ObjectCategoryId object_cat, const LabelSpace& space,
                      ad::Var w_proj);

}  // namespace hsg
