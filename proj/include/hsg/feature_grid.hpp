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

#include <vector>

#include "hsg/common.hpp"
#include "hsg/geometry.hpp"

namespace hsg {

/// Spatial feature map: channels x (height*width), one column per cell.
/// Cell (row r, col c) lives at column r*width + c. The depth map, when
/// present, is just another channel.
struct FeatureGrid {
  int height = 0;
  int width = 0;
  Matrix values;

  int channels() const { return static_cast<int>(values.rows()); }
  int cell_count() const { return height * width; }

  void validate() const {
    if (height <= 0 || width <= 0) throw ShapeError("FeatureGrid: non-positive extent");
    if (values.rows() < 1) throw ShapeError("FeatureGrid: needs at least one channel");
    if (values.cols() != cell_count())
      throw ShapeError("FeatureGrid: value columns != height*width");
    if (!values.allFinite()) throw NumericError("FeatureGrid: non-finite values");
  }

  static int cell_index(int row, int col, int width) { return row * width + col; }

  /// Center of a cell in normalized coordinates.
  std::pair<double, double> cell_center(int cell) const {
    const int r = cell / width;
    const int c = cell % width;
    return {(c + 0.5) / width, (r + 0.5) / height};
  }

  /// Cells whose centers lie inside the box, ascending.
  std::vector<int> cells_inside(const BoundingBox& box) const;
};

/// Zeroes every channel of each cell whose center lies outside the box.
FeatureGrid mask_features(const FeatureGrid& grid, const BoundingBox& box);

/// Per-channel mean over the given cells; empty selection pools to zero.
Vector mean_pool(const FeatureGrid& grid, const std::vector<int>& cells);

}  // namespace hsg
