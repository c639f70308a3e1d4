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
#include "hsg/assembly.hpp"

#include <cmath>

namespace hsg {

namespace {

void check_category(ObjectCategoryId id, const LabelSpace& space, const char* role) {
  if (id.v < 0 || id.v >= space.num_objects())
    throw Error(std::string("assemble_edge: ") + role + " category out of range");
}

Vector one_hots(ObjectCategoryId subject_cat, ObjectCategoryId object_cat,
                const LabelSpace& space) {
  const int no = space.num_objects();
  const int ns = space.num_object_supers();
  Vector v = Vector::Zero(2 * no + 2 * ns);
  v[subject_cat.v] = 1.0;
  v[no + space.object_super_of(subject_cat)] = 1.0;
  v[no + ns + object_cat.v] = 1.0;
  v[no + ns + no + space.object_super_of(object_cat)] = 1.0;
  return v;
}

}  // namespace

AssemblyParams AssemblyParams::init(int input_dim, int hidden_dim, Rng& rng) {
  if (input_dim < 1 || hidden_dim < 1)
    throw ShapeError("AssemblyParams: dimensions must be positive");
  const double a = 1.0 / std::sqrt(static_cast<double>(input_dim));
  return AssemblyParams{rng.uniform_matrix(input_dim, hidden_dim, -a, a)};
}

int assembly_input_dim(int grid_channels, const LabelSpace& space) {
  return 2 * grid_channels + 2 * space.num_objects() + 2 * space.num_object_supers();
}

Vector edge_input(const FeatureGrid& grid, const BoundingBox& subject_box,
                  const BoundingBox& object_box, ObjectCategoryId subject_cat,
                  ObjectCategoryId object_cat, const LabelSpace& space) {
  grid.validate();
  check_category(subject_cat, space, "subject");
  check_category(object_cat, space, "object");
  const FeatureGrid subject_masked = mask_features(grid, subject_box);
  const FeatureGrid object_masked = mask_features(grid, object_box);
  const Vector subject_pooled =
      mean_pool(subject_masked, grid.cells_inside(subject_box));
  const Vector object_pooled =
      mean_pool(object_masked, grid.cells_inside(object_box));
  const Vector hots = one_hots(subject_cat, object_cat, space);

  Vector u(subject_pooled.size() + object_pooled.size() + hots.size());
  u << subject_pooled, object_pooled, hots;
  return u;
}

EdgeContext assemble_edge(const FeatureGrid& grid, const BoundingBox& subject_box,
                          const BoundingBox& object_box, ObjectCategoryId subject_cat,
                          ObjectCategoryId object_cat, const LabelSpace& space,
                          const AssemblyParams& params) {
  const Vector u = edge_input(grid, subject_box, object_box, subject_cat,
                              object_cat, space);
  if (u.size() != params.w_proj.rows())
    throw ShapeError("assemble_edge: projection expects input dim " +
                     std::to_string(params.w_proj.rows()) + ", got " +
                     std::to_string(u.size()));
  EdgeContext ctx;
  ctx.hidden = params.w_proj.transpose() * u;
  require_finite(ctx.hidden, "assemble_edge");
  ctx.subject_category = subject_cat;
  ctx.object_category = object_cat;
  return ctx;
}

ad::Var assemble_edge(ad::Tape& tape, ad::Var grid_leaf, int grid_height,
                      int grid_width, const BoundingBox& subject_box,
                      const BoundingBox& object_box, ObjectCategoryId subject_cat,
                      ObjectCategoryId object_cat, const LabelSpace& space,
                      ad::Var w_proj) {
  check_category(subject_cat, space, "subject");
  check_category(object_cat, space, "object");
  FeatureGrid geom;  // geometry only; shares no storage with the leaf
  geom.height = grid_height;
  geom.width = grid_width;
  geom.values = Matrix::Zero(grid_leaf.rows(), grid_leaf.cols());
  if (geom.cell_count() != grid_leaf.cols())
    throw ShapeError("assemble_edge: grid leaf does not match height*width");

  const std::vector<int> subject_cells = geom.cells_inside(subject_box);
  const std::vector<int> object_cells = geom.cells_inside(object_box);
  const int cells = geom.cell_count();

  ad::Var subject_pooled =
      ad::mean_pool(ad::keep_columns(grid_leaf, subject_cells, cells), subject_cells);
  ad::Var object_pooled =
      ad::mean_pool(ad::keep_columns(grid_leaf, object_cells, cells), object_cells);
  ad::Var hots = tape.input(one_hots(subject_cat, object_cat, space));

  const std::array<ad::Var, 3> parts = {subject_pooled, object_pooled, hots};
  ad::Var u = ad::concat(parts);
  if (u.rows() != w_proj.rows())
    throw ShapeError("assemble_edge: projection/input dimension mismatch");
  return ad::linear(u, w_proj);
}

}  // namespace hsg
