// Copyright 2026 The ToOT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Layer masks for localized learning. A click on the final S x S feature grid
// yields a softened disk (the positive mask) and its complement (the negative
// mask); each is rescaled to unit mean before being multiplied into the final
// convolutional activations.

#ifndef TOOT_CORE_MASKING_HPP
#define TOOT_CORE_MASKING_HPP

#include <vector>

namespace toot {

enum class Polarity { kPositive, kNegative };

struct GridCell {
  int x = 0;
  int y = 0;
  bool operator==(const GridCell&) const = default;
};

/// Row-major S x S grid of reals; index (y * side + x).
struct MaskGrid {
  int side = 0;
  std::vector<double> values;

  double operator()(int x, int y) const { return values[std::size_t(y) * side + x]; }
  bool operator==(const MaskGrid&) const = default;
};

struct LayerMask {
  MaskGrid grid;
  Polarity polarity = Polarity::kPositive;
  GridCell click;

  int side() const { return grid.side; }
  bool operator==(const LayerMask&) const = default;
};

/// Radius on an S-cell grid: 4 cells at S = 14, scaled linearly otherwise.
double default_mask_radius(int grid_side);

/// Maps a normalized image coordinate in [0,1) to its grid cell,
/// floor(u * S), clamped into the grid.
GridCell click_to_cell(double u, double v, int grid_side);

/// Unnormalized positive mask: 1 inside distance r of the click, otherwise
/// exp(-4 ln2 * d / (1.5 r)^2) with d the Euclidean cell distance.
MaskGrid raw_positive_mask(GridCell click, double radius, int grid_side);

/// Element-wise 1 - Z.
MaskGrid raw_negative_mask(const MaskGrid& raw_positive);

/// Rescales to unit mean. Throws kDegenerateMask when the mean is not positive.
LayerMask normalize_mask(const MaskGrid& raw, Polarity polarity, GridCell click);

/// Convenience: the normalized positive and negative masks for one click.
struct MaskPair {
  LayerMask positive;
  LayerMask negative;
};
MaskPair masks_for_click(GridCell click, double radius, int grid_side);

}  // namespace toot

#endif  // TOOT_CORE_MASKING_HPP
