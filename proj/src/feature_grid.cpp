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
#include "hsg/feature_grid.hpp"

namespace hsg {

std::vector<int> FeatureGrid::cells_inside(const BoundingBox& box) const {
  box.validate();
  std::vector<int> cells;
  for (int cell = 0; cell < cell_count(); ++cell) {
    const auto [cx, cy] = cell_center(cell);
    if (box.contains(cx, cy)) cells.push_back(cell);
  }
  return cells;
}

FeatureGrid mask_features(const FeatureGrid& grid, const BoundingBox& box) {
  grid.validate();
  FeatureGrid out = grid;
  out.values.setZero();
  for (int cell : grid.cells_inside(box)) out.values.col(cell) = grid.values.col(cell);
  return out;
}

Vector mean_pool(const FeatureGrid& grid, const std::vector<int>& cells) {
  grid.validate();
  Vector pooled = Vector::Zero(grid.channels());
  if (cells.empty()) return pooled;
  for (int cell : cells) {
    if (cell < 0 || cell >= grid.cell_count())
      throw ShapeError("mean_pool: cell index out of range");
    pooled += grid.values.col(cell);
  }
  return pooled / static_cast<double>(cells.size());
}

}  // namespace hsg
