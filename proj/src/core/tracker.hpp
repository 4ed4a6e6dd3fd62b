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

// Median-Flow bounding-box tracker on top of pyramidal Lucas-Kanade.
//
// A grid of points inside the box is tracked forward and then backward; the
// round-trip distance (forward-backward error) filters out unreliable points.
// The box moves by the median displacement of the surviving points and scales
// by the median ratio of their pairwise distances. Too few survivors, or a
// large median forward-backward error, marks the track as failed.

#ifndef TOOT_CORE_TRACKER_HPP
#define TOOT_CORE_TRACKER_HPP

#include <span>
#include <vector>

#include "image.hpp"

namespace toot {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.0;
  double height = 0.0;

  /// Shrinks to the frame if needed, then shifts fully inside [0,W] x [0,H].
  BBox clamped(int frame_width, int frame_height) const;
  bool operator==(const BBox&) const = default;
};

enum class TrackStatus { kIdle, kActive, kFailed };
const char* to_string(TrackStatus s);

struct TrackerConfig {
  int pyramid_levels = 3;
  int window = 11;
  int max_iterations = 20;
  double convergence = 0.03;    // px, iteration stops below this step
  double divergence = 0.5;      // px, final step above this marks the point invalid
  double min_eigenvalue = 1e-6; // of the window-averaged structure tensor, intensity in [0,1]
  int grid_points = 10;         // P x P seeded points
  double max_median_fb = 2.0;   // px
  double min_kept_fraction = 0.2;
  double bbox_fraction = 0.25;  // of frame height

  /// Per-frame displacement bound, 2^(levels + 2) px.
  double max_displacement() const;
};

struct TrackerState {
  TrackStatus status = TrackStatus::kIdle;
  BBox bbox;
  std::vector<Point2> points;
  int frame_index = 0;
};

/// Image pyramid with precomputed gradients, level 0 at full resolution.
class Pyramid {
 public:
  Pyramid(const GrayImage& base, int levels);

  int levels() const { return int(images_.size()); }
  const GrayImage& image(int level) const { return images_[level]; }
  const GrayImage& grad_x(int level) const { return grad_x_[level]; }
  const GrayImage& grad_y(int level) const { return grad_y_[level]; }

 private:
  std::vector<GrayImage> images_;
  std::vector<GrayImage> grad_x_;
  std::vector<GrayImage> grad_y_;
};

struct FlowResult {
  std::vector<Point2> points;
  std::vector<bool> valid;
};

FlowResult lk_flow(const Pyramid& prev, const Pyramid& next, std::span<const Point2> points,
                   const TrackerConfig& cfg = {});
FlowResult lk_flow(const RgbImage& prev, const RgbImage& next, std::span<const Point2> points,
                   const TrackerConfig& cfg = {});

/// Round-trip distance per point; +inf where either direction is invalid.
std::vector<double> fb_error(const Pyramid& prev, const Pyramid& next,
                             std::span<const Point2> points, const TrackerConfig& cfg = {});
std::vector<double> fb_error(const RgbImage& prev, const RgbImage& next,
                             std::span<const Point2> points, const TrackerConfig& cfg = {});

/// Uniform P x P grid inside the box.
std::vector<Point2> seed_points(const BBox& box, int per_side);

/// Square box of side bbox_fraction * frame height centered on the click.
/// `bbox_side` <= 0 selects that default.
TrackerState init_track(const RgbImage& frame, Point2 center, double bbox_side = 0.0,
                        const TrackerConfig& cfg = {}, int frame_index = 0);
TrackerState init_track(int frame_width, int frame_height, Point2 center, double bbox_side = 0.0,
                        const TrackerConfig& cfg = {}, int frame_index = 0);

TrackerState update_track(const TrackerState& state, const RgbImage& prev, const RgbImage& next,
                          const TrackerConfig& cfg = {});
TrackerState update_track(const TrackerState& state, const Pyramid& prev, const Pyramid& next,
                          int frame_width, int frame_height, const TrackerConfig& cfg = {});

}  // namespace toot

#endif  // TOOT_CORE_TRACKER_HPP
