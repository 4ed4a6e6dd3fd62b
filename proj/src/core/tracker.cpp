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

#include "tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace toot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

float clamped_at(const GrayImage& img, int x, int y) {
  x = std::clamp(x, 0, img.width - 1);
  y = std::clamp(y, 0, img.height - 1);
  return img(x, y);
}

double bilinear(const GrayImage& img, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const int x0 = int(fx);
  const int y0 = int(fy);
  const double ax = x - fx;
  const double ay = y - fy;
  const double a = clamped_at(img, x0, y0);
  const double b = clamped_at(img, x0 + 1, y0);
  const double c = clamped_at(img, x0, y0 + 1);
  const double d = clamped_at(img, x0 + 1, y0 + 1);
  return (1 - ay) * ((1 - ax) * a + ax * b) + ay * ((1 - ax) * c + ax * d);
}

// 5-tap binomial blur followed by 2x decimation.
GrayImage downsample(const GrayImage& src) {
  static constexpr float kTaps[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
  GrayImage tmp{src.width, src.height, std::vector<float>(src.data.size())};
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      float s = 0.f;
      for (int k = -2; k <= 2; ++k) s += kTaps[k + 2] * clamped_at(src, x + k, y);
      tmp(x, y) = s;
    }
  }
  GrayImage out;
  out.width = (src.width + 1) / 2;
  out.height = (src.height + 1) / 2;
  out.data.assign(std::size_t(out.width) * out.height, 0.f);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      float s = 0.f;
      for (int k = -2; k <= 2; ++k) s += kTaps[k + 2] * clamped_at(tmp, 2 * x, 2 * y + k);
      out(x, y) = s;
    }
  }
  return out;
}

bool inside(const GrayImage& img, double x, double y) {
  return x >= 0.0 && y >= 0.0 && x <= img.width - 1 && y <= img.height - 1;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kInf;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  if (std::isinf(lo) || std::isinf(hi)) return std::isinf(hi) ? hi : lo;
  return 0.5 * (lo + hi);
}

void require_same_size(const Pyramid& a, const Pyramid& b) {
  require(a.image(0).width == b.image(0).width && a.image(0).height == b.image(0).height &&
              a.levels() == b.levels(),
          ErrorKind::kUsage, "optical flow frames differ in size");
}

}  // namespace

const char* to_string(TrackStatus s) {
  switch (s) {
    case TrackStatus::kIdle: return "idle";
    case TrackStatus::kActive: return "active";
    case TrackStatus::kFailed: return "failed";
  }
  return "idle";
}

double TrackerConfig::max_displacement() const { return std::ldexp(1.0, pyramid_levels + 2); }

BBox BBox::clamped(int frame_width, int frame_height) const {
  BBox b = *this;
  b.width = std::min(b.width, double(frame_width));
  b.height = std::min(b.height, double(frame_height));
  b.cx = std::clamp(b.cx, b.width / 2, frame_width - b.width / 2);
  b.cy = std::clamp(b.cy, b.height / 2, frame_height - b.height / 2);
  return b;
}

Pyramid::Pyramid(const GrayImage& base, int levels) {
  require(levels >= 1, ErrorKind::kUsage, "pyramid needs at least one level");
  images_.push_back(base);
  for (int l = 1; l < levels; ++l) images_.push_back(downsample(images_.back()));
  for (const GrayImage& img : images_) {
    GrayImage gx{img.width, img.height, std::vector<float>(img.data.size())};
    GrayImage gy = gx;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        gx(x, y) = 0.5f * (clamped_at(img, x + 1, y) - clamped_at(img, x - 1, y));
        gy(x, y) = 0.5f * (clamped_at(img, x, y + 1) - clamped_at(img, x, y - 1));
      }
    }
    grad_x_.push_back(std::move(gx));
    grad_y_.push_back(std::move(gy));
  }
}

FlowResult lk_flow(const Pyramid& prev, const Pyramid& next, std::span<const Point2> points,
                   const TrackerConfig& cfg) {
  require_same_size(prev, next);
  const int half = cfg.window / 2;
  const double npix = double(cfg.window) * cfg.window;
  const int top = prev.levels() - 1;

  FlowResult out;
  out.points.resize(points.size());
  out.valid.assign(points.size(), true);

  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point2 p = points[i];
    if (!inside(prev.image(0), p.x, p.y)) {
      out.valid[i] = false;
      out.points[i] = p;
      continue;
    }
    double gx = 0.0;  // guess carried between levels, in level units
    double gy = 0.0;
    bool ok = true;
    for (int level = top; level >= 0 && ok; --level) {
      const double scale = std::ldexp(1.0, -level);
      const double px = p.x * scale;
      const double py = p.y * scale;
      const GrayImage& I = prev.image(level);
      const GrayImage& J = next.image(level);
      const GrayImage& Ix = prev.grad_x(level);
      const GrayImage& Iy = prev.grad_y(level);

      double gxx = 0.0, gxy = 0.0, gyy = 0.0;
      std::vector<double> tmpl;
      std::vector<double> dxs;
      std::vector<double> dys;
      tmpl.reserve(std::size_t(npix));
      dxs.reserve(std::size_t(npix));
      dys.reserve(std::size_t(npix));
      for (int wy = -half; wy <= half; ++wy) {
        for (int wx = -half; wx <= half; ++wx) {
          const double ix = bilinear(Ix, px + wx, py + wy);
          const double iy = bilinear(Iy, px + wx, py + wy);
          gxx += ix * ix;
          gxy += ix * iy;
          gyy += iy * iy;
          tmpl.push_back(bilinear(I, px + wx, py + wy));
          dxs.push_back(ix);
          dys.push_back(iy);
        }
      }
      const double tr = gxx + gyy;
      const double det = gxx * gyy - gxy * gxy;
      const double min_eig = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
      if (min_eig / npix < cfg.min_eigenvalue || det <= 0.0) {
        if (level == 0) ok = false;
        gx *= 2.0;
        gy *= 2.0;
        continue;
      }

      double vx = 0.0;
      double vy = 0.0;
      bool converged = false;
      double last_step = 0.0;
      double sx = 0.0;
      double sy = 0.0;
      for (int it = 0; it < cfg.max_iterations; ++it) {
        const double qx = px + gx + vx;
        const double qy = py + gy + vy;
        if (!inside(J, qx, qy)) {
          // Leaving the image is fatal only at full resolution; a coarse level
          // hands its last in-bounds estimate down instead.
          if (level == 0) {
            ok = false;
          } else {
            vx -= sx;
            vy -= sy;
            converged = true;
          }
          break;
        }
        double bx = 0.0;
        double by = 0.0;
        std::size_t k = 0;
        for (int wy = -half; wy <= half; ++wy) {
          for (int wx = -half; wx <= half; ++wx, ++k) {
            const double diff = tmpl[k] - bilinear(J, qx + wx, qy + wy);
            bx += diff * dxs[k];
            by += diff * dys[k];
          }
        }
        sx = (gyy * bx - gxy * by) / det;
        sy = (gxx * by - gxy * bx) / det;
        vx += sx;
        vy += sy;
        last_step = std::hypot(sx, sy);
        if (last_step < cfg.convergence) {
          converged = true;
          break;
        }
      }
      if (!ok) break;
      if (level == 0) {
        // Running out of iterations while still oscillating at sub-pixel scale
        // is normal on rendered frames; only a large final step is a failure.
        if (!converged && last_step > cfg.divergence) ok = false;
        gx += vx;
        gy += vy;
      } else {
        gx = 2.0 * (gx + vx);
        gy = 2.0 * (gy + vy);
      }
    }
    const Point2 q{p.x + gx, p.y + gy};
    out.points[i] = q;
    out.valid[i] = ok && inside(next.image(0), q.x, q.y);
  }
  return out;
}

FlowResult lk_flow(const RgbImage& prev, const RgbImage& next, std::span<const Point2> points,
                   const TrackerConfig& cfg) {
  require(prev.width == next.width && prev.height == next.height, ErrorKind::kUsage,
          "optical flow frames differ in size");
  return lk_flow(Pyramid(to_gray(prev), cfg.pyramid_levels),
                 Pyramid(to_gray(next), cfg.pyramid_levels), points, cfg);
}

std::vector<double> fb_error(const Pyramid& prev, const Pyramid& next,
                             std::span<const Point2> points, const TrackerConfig& cfg) {
  const FlowResult fwd = lk_flow(prev, next, points, cfg);
  const FlowResult bwd = lk_flow(next, prev, fwd.points, cfg);
  std::vector<double> err(points.size(), kInf);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (fwd.valid[i] && bwd.valid[i]) {
      err[i] = std::hypot(bwd.points[i].x - points[i].x, bwd.points[i].y - points[i].y);
    }
  }
  return err;
}

std::vector<double> fb_error(const RgbImage& prev, const RgbImage& next,
                             std::span<const Point2> points, const TrackerConfig& cfg) {
  require(prev.width == next.width && prev.height == next.height, ErrorKind::kUsage,
          "optical flow frames differ in size");
  return fb_error(Pyramid(to_gray(prev), cfg.pyramid_levels),
                  Pyramid(to_gray(next), cfg.pyramid_levels), points, cfg);
}

std::vector<Point2> seed_points(const BBox& box, int per_side) {
  std::vector<Point2> pts;
  pts.reserve(std::size_t(per_side) * per_side);
  const double x0 = box.cx - box.width / 2;
  const double y0 = box.cy - box.height / 2;
  for (int j = 0; j < per_side; ++j) {
    for (int i = 0; i < per_side; ++i) {
      pts.push_back({x0 + (i + 0.5) * box.width / per_side, y0 + (j + 0.5) * box.height / per_side});
    }
  }
  return pts;
}

TrackerState init_track(int frame_width, int frame_height, Point2 center, double bbox_side,
                        const TrackerConfig& cfg, int frame_index) {
  require(center.x >= 0.0 && center.y >= 0.0 && center.x < frame_width && center.y < frame_height,
          ErrorKind::kUsage, "tracker center outside the frame");
  const double side = bbox_side > 0.0 ? bbox_side : cfg.bbox_fraction * frame_height;
  TrackerState s;
  s.status = TrackStatus::kActive;
  s.bbox = BBox{center.x, center.y, side, side}.clamped(frame_width, frame_height);
  s.points = seed_points(s.bbox, cfg.grid_points);
  s.frame_index = frame_index;
  return s;
}

TrackerState init_track(const RgbImage& frame, Point2 center, double bbox_side,
                        const TrackerConfig& cfg, int frame_index) {
  return init_track(frame.width, frame.height, center, bbox_side, cfg, frame_index);
}

TrackerState update_track(const TrackerState& state, const Pyramid& prev, const Pyramid& next,
                          int frame_width, int frame_height, const TrackerConfig& cfg) {
  require(state.status == TrackStatus::kActive, ErrorKind::kUsage,
          std::string("update_track on a ") + to_string(state.status) + " tracker");
  require(!state.points.empty(), ErrorKind::kUsage, "active tracker without points");

  TrackerState failed = state;
  failed.status = TrackStatus::kFailed;
  failed.points.clear();
  failed.frame_index = state.frame_index + 1;

  const FlowResult fwd = lk_flow(prev, next, state.points, cfg);
  const FlowResult bwd = lk_flow(next, prev, fwd.points, cfg);
  const std::size_t n = state.points.size();
  std::vector<double> fb(n, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    if (fwd.valid[i] && bwd.valid[i]) {
      fb[i] = std::hypot(bwd.points[i].x - state.points[i].x, bwd.points[i].y - state.points[i].y);
    }
  }
  const double median_fb = median_of(fb);
  if (!(median_fb <= cfg.max_median_fb)) return failed;

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(fb[i]) && fb[i] <= median_fb) kept.push_back(i);
  }
  if (double(kept.size()) < cfg.min_kept_fraction * double(cfg.grid_points * cfg.grid_points)) {
    return failed;
  }

  std::vector<double> dxs;
  std::vector<double> dys;
  for (std::size_t i : kept) {
    dxs.push_back(fwd.points[i].x - state.points[i].x);
    dys.push_back(fwd.points[i].y - state.points[i].y);
  }
  const double dx = median_of(dxs);
  const double dy = median_of(dys);
  if (std::hypot(dx, dy) > cfg.max_displacement()) return failed;

  std::vector<double> ratios;
  for (std::size_t a = 0; a < kept.size(); ++a) {
    for (std::size_t b = a + 1; b < kept.size(); ++b) {
      const Point2& p0 = state.points[kept[a]];
      const Point2& p1 = state.points[kept[b]];
      const double d0 = std::hypot(p1.x - p0.x, p1.y - p0.y);
      if (d0 <= 1e-9) continue;
      const Point2& q0 = fwd.points[kept[a]];
      const Point2& q1 = fwd.points[kept[b]];
      ratios.push_back(std::hypot(q1.x - q0.x, q1.y - q0.y) / d0);
    }
  }
  const double scale = ratios.empty() ? 1.0 : median_of(ratios);

  TrackerState out;
  out.status = TrackStatus::kActive;
  out.bbox = BBox{state.bbox.cx + dx, state.bbox.cy + dy, state.bbox.width * scale,
                  state.bbox.height * scale}
                 .clamped(frame_width, frame_height);
  out.points = seed_points(out.bbox, cfg.grid_points);
  out.frame_index = state.frame_index + 1;
  return out;
}

TrackerState update_track(const TrackerState& state, const RgbImage& prev, const RgbImage& next,
                          const TrackerConfig& cfg) {
  require(prev.width == next.width && prev.height == next.height, ErrorKind::kUsage,
          "optical flow frames differ in size");
  return update_track(state, Pyramid(to_gray(prev), cfg.pyramid_levels),
                      Pyramid(to_gray(next), cfg.pyramid_levels), prev.width, prev.height, cfg);
}

}  // namespace toot
