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

#include "masking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "error.hpp"

namespace toot {

double default_mask_radius(int grid_side) { return 4.0 * grid_side / 14.0; }

GridCell click_to_cell(double u, double v, int grid_side) {
  require(std::isfinite(u) && std::isfinite(v) && u >= 0.0 && v >= 0.0 && u < 1.0 && v < 1.0,
          ErrorKind::kUsage, "click coordinates must lie in [0,1)");
  const auto cell = [grid_side](double t) {
    return std::clamp(int(std::floor(t * grid_side)), 0, grid_side - 1);
  };
  return {cell(u), cell(v)};
}

MaskGrid raw_positive_mask(GridCell click, double radius, int grid_side) {
  require(grid_side > 0, ErrorKind::kUsage, "grid side must be positive");
  require(click.x >= 0 && click.x < grid_side && click.y >= 0 && click.y < grid_side,
          ErrorKind::kUsage,
          "click (" + std::to_string(click.x) + "," + std::to_string(click.y) +
              ") outside the " + std::to_string(grid_side) + "-cell grid");
  require(radius > 0.0 && std::isfinite(radius), ErrorKind::kUsage, "radius must be positive");

  MaskGrid grid{grid_side, std::vector<double>(std::size_t(grid_side) * grid_side)};
  const double spread = (1.5 * radius) * (1.5 * radius);
  for (int y = 0; y < grid_side; ++y) {
    for (int x = 0; x < grid_side; ++x) {
      const double dx = x - click.x;
      const double dy = y - click.y;
      const double d2 = dx * dx + dy * dy;
      double z = 1.0;
      if (d2 > radius * radius) {
        // Distance (not squared) over an area-like denominator, as published.
        z = std::exp(-4.0 * std::numbers::ln2 * std::sqrt(d2) / spread);
      }
      grid.values[std::size_t(y) * grid_side + x] = z;
    }
  }
  return grid;
}

MaskGrid raw_negative_mask(const MaskGrid& raw_positive) {
  MaskGrid out = raw_positive;
  for (double& v : out.values) v = 1.0 - v;
  return out;
}

LayerMask normalize_mask(const MaskGrid& raw, Polarity polarity, GridCell click) {
  require(raw.side > 0 && raw.values.size() == std::size_t(raw.side) * raw.side,
          ErrorKind::kUsage, "mask grid shape mismatch");
  double sum = 0.0;
  for (double v : raw.values) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::kUsage, "mask values must be finite and >= 0");
    sum += v;
  }
  const double mean = sum / double(raw.values.size());
  require(mean > 0.0, ErrorKind::kDegenerateMask, "mask has zero mean and cannot be normalized");
  LayerMask mask{raw, polarity, click};
  for (double& v : mask.grid.values) v /= mean;
  return mask;
}

MaskPair masks_for_click(GridCell click, double radius, int grid_side) {
  const MaskGrid pos = raw_positive_mask(click, radius, grid_side);
  return {normalize_mask(pos, Polarity::kPositive, click),
          normalize_mask(raw_negative_mask(pos), Polarity::kNegative, click)};
}

}  // namespace toot
