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

#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace toot {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Procedural textures

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double lattice(std::uint64_t seed, int ix, int iy) {
  std::uint64_t h = mix64(seed ^ mix64(std::uint64_t(std::uint32_t(ix)) << 32 | std::uint32_t(iy)));
  return double(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, double x, double y, double scale) {
  double fx = x / scale, fy = y / scale;
  int ix = int(std::floor(fx)), iy = int(std::floor(fy));
  double tx = fx - ix, ty = fy - iy;
  tx = tx * tx * (3 - 2 * tx);
  ty = ty * ty * (3 - 2 * ty);
  double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
  double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
  return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

struct Family {
  double r, g, b;
  double amplitude;  // large-scale shading
  double scale;      // px per noise cell
  double grain;      // per-pixel noise
};

// Ground covers seen from above: grass, asphalt, dirt, water, scrub, gravel.
constexpr Family kFamilies[] = {
    {72, 118, 52, 34, 6.0, 7},   {92, 94, 99, 26, 3.0, 10},  {132, 112, 82, 30, 9.0, 8},
    {58, 86, 116, 22, 12.0, 4},  {98, 108, 70, 30, 4.0, 9},  {120, 118, 112, 28, 2.0, 14},
};
constexpr int kFamilyCount = int(std::size(kFamilies));

std::uint8_t to_byte(double v) {
  return std::uint8_t(std::clamp(std::lround(v), 0L, 255L));
}

// A wide strip of K textured bands that the camera pans across.
class World {
 public:
  World(int frame_size, int bands, int jitter_margin, std::uint64_t seed, int family_offset)
      : band_width_(frame_size), canvas_(frame_size * (bands + 1), frame_size + 2 * jitter_margin) {
    std::mt19937_64 rng(seed);
    std::vector<int> families(bands);
    std::vector<std::uint64_t> seeds(bands * 3);
    for (int k = 0; k < bands; ++k) families[k] = (k + family_offset) % kFamilyCount;
    for (auto& s : seeds) s = rng();
    // The last band also covers the extra frame width at the end of the strip.
    for (int y = 0; y < canvas_.height; ++y) {
      for (int x = 0; x < canvas_.width; ++x) {
        int k = std::min(bands - 1, x / band_width_);
        const Family& f = kFamilies[families[k]];
        double v = 0.65 * value_noise(seeds[3 * k], x, y, f.scale) +
                   0.35 * value_noise(seeds[3 * k + 1], x, y, f.scale / 2.5);
        double shade = (v - 0.5) * 2.0 * f.amplitude;
        std::uint64_t h = mix64(seeds[3 * k + 2] ^ (std::uint64_t(y) << 32 | std::uint32_t(x)));
        double grain = (double(h >> 11) * 0x1.0p-53 - 0.5) * 2.0 * f.grain;
        std::uint8_t* p = canvas_.at(x, y);
        p[0] = to_byte(f.r + shade + grain);
        p[1] = to_byte(f.g + shade + grain);
        p[2] = to_byte(f.b + 0.8 * shade + grain);
      }
    }
  }

  int width() const { return canvas_.width; }
  int height() const { return canvas_.height; }

  RgbImage crop(int x0, int y0, int size) const {
    RgbImage out(size, size);
    for (int y = 0; y < size; ++y) {
      const std::uint8_t* src = canvas_.at(x0, y0 + y);
      std::copy(src, src + 3 * size, out.at(0, y));
    }
    return out;
  }

 private:
  int band_width_;
  RgbImage canvas_;
};

// Camera offsets into the world: a steady pan plus bounded vertical hover.
std::vector<std::pair<int, int>> camera_path(const World& world, int frame_size, int frames,
                                             int jitter, std::mt19937_64& rng) {
  std::vector<std::pair<int, int>> path(frames);
  int x_range = world.width() - frame_size;
  int y_range = world.height() - frame_size;
  x_range = std::min<long>(x_range, long(frames - 1) * jitter);
  int x = 0, y = y_range / 2;
  std::uniform_int_distribution<int> step(-jitter, jitter);
  for (int t = 0; t < frames; ++t) {
    if (t > 0 && jitter > 0) {
      int target = frames > 1 ? int(std::lround(double(x_range) * t / (frames - 1))) : 0;
      x += std::clamp(target - x, -jitter, jitter);
      y = std::clamp(y + step(rng), 0, y_range);
    }
    path[t] = {x, y};
  }
  return path;
}

// ---------------------------------------------------------------------------
// Sprites

struct SpriteStyle {
  double body[3];
  double stripe[3];
  double accent[3];
};

constexpr SpriteStyle kTargetStyle = {{214, 38, 44}, {132, 18, 26}, {238, 196, 170}};
constexpr SpriteStyle kDistractorStyle = {{226, 228, 234}, {150, 152, 160}, {60, 62, 70}};

struct Sprite {
  double x = 0, y = 0;  // center, frame coordinates
  double vx = 0, vy = 0;
  int w = 12, h = 10;
};

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// Body with vertical stripes and a horizontal accent band, in sprite-local
// coordinates.
const double* sprite_colour(const SpriteStyle& style, const Sprite& s, double lx, double ly) {
  if (ly > 0.3 * s.h && ly < 0.5 * s.h) return style.accent;
  if (int(std::floor(lx / 3.0)) % 2 == 1) return style.stripe;
  return style.body;
}

// Area-weighted compositing at sub-pixel position. Returns the number of
// pixels the sprite touches.
int draw_sprite(RgbImage& img, const Sprite& s, const SpriteStyle& style) {
  double x0 = s.x - s.w / 2.0, x1 = s.x + s.w / 2.0;
  double y0 = s.y - s.h / 2.0, y1 = s.y + s.h / 2.0;
  int px0 = std::max(0, int(std::floor(x0))), px1 = std::min(img.width - 1, int(std::ceil(x1)));
  int py0 = std::max(0, int(std::floor(y0))), py1 = std::min(img.height - 1, int(std::ceil(y1)));
  int touched = 0;
  for (int py = py0; py <= py1; ++py) {
    double ay = overlap(py, py + 1, y0, y1);
    if (ay <= 0) continue;
    for (int px = px0; px <= px1; ++px) {
      double a = ay * overlap(px, px + 1, x0, x1);
      if (a <= 0) continue;
      // Pattern colour averaged over a 4x4 grid of samples inside the sprite,
      // so the texture moves smoothly with sub-pixel motion.
      double col[3] = {0, 0, 0};
      int samples = 0;
      for (int sy = 0; sy < 4; ++sy) {
        double ly = py + (sy + 0.5) / 4.0 - y0;
        if (ly < 0 || ly >= s.h) continue;
        for (int sx = 0; sx < 4; ++sx) {
          double lx = px + (sx + 0.5) / 4.0 - x0;
          if (lx < 0 || lx >= s.w) continue;
          const double* c = sprite_colour(style, s, lx, ly);
          for (int k = 0; k < 3; ++k) col[k] += c[k];
          ++samples;
        }
      }
      if (samples == 0) {
        for (int k = 0; k < 3; ++k) col[k] = style.body[k];
      } else {
        for (double& v : col) v /= samples;
      }
      std::uint8_t* p = img.at(px, py);
      for (int c = 0; c < 3; ++c) p[c] = to_byte(a * col[c] + (1 - a) * p[c]);
      ++touched;
    }
  }
  return touched;
}

bool inside(const Sprite& s, int size) {
  return s.x >= 0 && s.x < size && s.y >= 0 && s.y < size;
}

// Target motion: wander between waypoints while present, leave through the
// nearest edge when the present segment ends, stay away for a while, then
// re-enter from a random edge.
class TargetMotion {
 public:
  // Sequences open on an empty scene so the first background is also seen
  // without the target.
  TargetMotion(const GenParams& p, std::mt19937_64& rng) : p_(p), rng_(rng) {
    new_size();
    s_.x = -p_.frame_size;
    s_.y = p_.frame_size / 2.0;
    phase_ = Phase::kAway;
    remaining_ = uniform(p_.absent_min, p_.absent_max);
  }

  const Sprite& sprite() const { return s_; }
  bool visible_phase() const { return phase_ != Phase::kAway; }

  void advance() {
    switch (phase_) {
      case Phase::kPresent:
        if (inside(s_, p_.frame_size) && --remaining_ <= 0) start_exit();
        steer();
        break;
      case Phase::kExit:
        steer();
        if (fully_out()) {
          phase_ = Phase::kAway;
          remaining_ = uniform(p_.absent_min, p_.absent_max);
        }
        break;
      case Phase::kAway:
        if (--remaining_ <= 0) enter();
        break;
    }
  }

 private:
  enum class Phase { kPresent, kExit, kAway };

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double margin() const { return s_.w / 2.0 + 2.0; }

  void new_size() {
    s_.w = uniform(p_.sprite_min, p_.sprite_max);
    s_.h = std::max(2, int(std::lround(s_.w * 0.8)));
  }

  void start_present() {
    phase_ = Phase::kPresent;
    remaining_ = uniform(p_.present_min, p_.present_max);
    speed_ = std::min(p_.max_speed, p_.cruise_speed * uniform(0.6, 1.2));
    pick_waypoint();
  }

  void pick_waypoint() {
    wx_ = uniform(margin(), p_.frame_size - margin());
    wy_ = uniform(margin(), p_.frame_size - margin());
  }

  void start_exit() {
    phase_ = Phase::kExit;
    double n = p_.frame_size, off = s_.w + 2.0;
    double d[4] = {s_.x, n - s_.x, s_.y, n - s_.y};
    int e = int(std::min_element(d, d + 4) - d);
    wx_ = e == 0 ? -off : e == 1 ? n + off : s_.x;
    wy_ = e == 2 ? -off : e == 3 ? n + off : s_.y;
  }

  bool fully_out() const {
    double n = p_.frame_size;
    return s_.x + s_.w / 2.0 <= 0 || s_.x - s_.w / 2.0 >= n || s_.y + s_.h / 2.0 <= 0 ||
           s_.y - s_.h / 2.0 >= n;
  }

  void enter() {
    new_size();
    double n = p_.frame_size, off = s_.w / 2.0 + 1.0;
    double along = uniform(margin(), n - margin());
    switch (uniform(0, 3)) {
      case 0: s_.x = -off; s_.y = along; break;
      case 1: s_.x = n + off; s_.y = along; break;
      case 2: s_.x = along; s_.y = -off; break;
      default: s_.x = along; s_.y = n + off; break;
    }
    s_.vx = s_.vy = 0;
    start_present();
  }

  void steer() {
    double dx = wx_ - s_.x, dy = wy_ - s_.y;
    double dist = std::hypot(dx, dy);
    if (phase_ == Phase::kPresent && dist < 2.0 * speed_ && inside(s_, p_.frame_size)) {
      pick_waypoint();
      dx = wx_ - s_.x;
      dy = wy_ - s_.y;
      dist = std::hypot(dx, dy);
    }
    double ux = dist > 0 ? dx / dist : 0, uy = dist > 0 ? dy / dist : 0;
    s_.vx = 0.75 * s_.vx + 0.25 * speed_ * ux;
    s_.vy = 0.75 * s_.vy + 0.25 * speed_ * uy;
    double v = std::hypot(s_.vx, s_.vy);
    if (v < 0.5 * speed_ && dist > 0) {
      s_.vx = 0.5 * speed_ * ux;
      s_.vy = 0.5 * speed_ * uy;
      v = 0.5 * speed_;
    }
    if (v > p_.max_speed) {
      s_.vx *= p_.max_speed / v;
      s_.vy *= p_.max_speed / v;
    }
    s_.x += s_.vx;
    s_.y += s_.vy;
  }

  const GenParams& p_;
  std::mt19937_64& rng_;
  Sprite s_;
  Phase phase_ = Phase::kPresent;
  int remaining_ = 0;
  double speed_ = 0;
  double wx_ = 0, wy_ = 0;
};

// Distractor: always in view, bounces off the frame edges.
class DistractorMotion {
 public:
  DistractorMotion(const GenParams& p, std::mt19937_64& rng) : n_(p.frame_size) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    s_.w = p.sprite_max;
    s_.h = std::max(2, int(std::lround(p.sprite_max * 0.5)));
    s_.x = s_.w / 2.0 + u(rng) * (n_ - s_.w);
    s_.y = s_.h / 2.0 + u(rng) * (n_ - s_.h);
    double a = u(rng) * 6.283185307179586, sp = std::min(p.max_speed, 0.6 * p.cruise_speed);
    s_.vx = sp * std::cos(a);
    s_.vy = sp * std::sin(a);
  }

  const Sprite& sprite() const { return s_; }

  void advance() {
    s_.x += s_.vx;
    s_.y += s_.vy;
    if (s_.x < s_.w / 2.0 || s_.x > n_ - s_.w / 2.0) s_.vx = -s_.vx;
    if (s_.y < s_.h / 2.0 || s_.y > n_ - s_.h / 2.0) s_.vy = -s_.vy;
    s_.x = std::clamp(s_.x, s_.w / 2.0, n_ - s_.w / 2.0);
    s_.y = std::clamp(s_.y, s_.h / 2.0, n_ - s_.h / 2.0);
  }

 private:
  double n_;
  Sprite s_;
};

struct RenderedFrame {
  RgbImage image;
  Annotation annotation;
  int target_pixels = 0;
};

// Renders `frames` consecutive frames of one continuous shot.
class Shot {
 public:
  Shot(const GenParams& p, std::uint64_t seed, int family_offset, int frames)
      : p_(p),
        rng_(seed),
        world_(p.frame_size, p.background_count, std::max(p.jitter, 1) * 4, rng_(), family_offset),
        path_(camera_path(world_, p.frame_size, frames, p.jitter, rng_)),
        target_(p_, rng_) {
    if (p.distractor) distractor_.emplace(p_, rng_);
  }

  RenderedFrame next() {
    auto [cx, cy] = path_[std::min<std::size_t>(t_, path_.size() - 1)];
    RenderedFrame out;
    out.image = world_.crop(cx, cy, p_.frame_size);
    if (distractor_) draw_sprite(out.image, distractor_->sprite(), kDistractorStyle);
    const Sprite& s = target_.sprite();
    if (target_.visible_phase()) out.target_pixels = draw_sprite(out.image, s, kTargetStyle);
    if (inside(s, p_.frame_size)) {
      out.annotation.present = true;
      out.annotation.center = Point2{s.x / p_.frame_size, s.y / p_.frame_size};
    }
    ++t_;
    target_.advance();
    if (distractor_) distractor_->advance();
    return out;
  }

 private:
  const GenParams& p_;
  std::mt19937_64 rng_;
  World world_;
  std::vector<std::pair<int, int>> path_;
  TargetMotion target_;
  std::optional<DistractorMotion> distractor_;
  std::size_t t_ = 0;
};

// Evenly spaced pick of `count` items from `from`.
std::vector<int> spread(const std::vector<int>& from, int count) {
  std::vector<int> out(count);
  for (int j = 0; j < count; ++j)
    out[j] = from[std::size_t((std::size_t(j) * from.size()) / std::size_t(count))];
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

ordered_json params_to_json(const GenParams& p) {
  ordered_json j;
  j["name"] = p.name;
  j["frame_size"] = p.frame_size;
  j["train_frames"] = p.train_frames;
  j["test_frames"] = p.test_frames;
  j["sprite_min"] = p.sprite_min;
  j["sprite_max"] = p.sprite_max;
  j["max_speed"] = p.max_speed;
  j["cruise_speed"] = p.cruise_speed;
  j["present_min"] = p.present_min;
  j["present_max"] = p.present_max;
  j["absent_min"] = p.absent_min;
  j["absent_max"] = p.absent_max;
  j["background_count"] = p.background_count;
  j["distractor"] = p.distractor;
  j["jitter"] = p.jitter;
  return j;
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

GenParams params_from_json(const json& j) {
  GenParams p;
  read_field(j, "name", p.name);
  read_field(j, "frame_size", p.frame_size);
  read_field(j, "train_frames", p.train_frames);
  read_field(j, "test_frames", p.test_frames);
  read_field(j, "sprite_min", p.sprite_min);
  read_field(j, "sprite_max", p.sprite_max);
  read_field(j, "max_speed", p.max_speed);
  read_field(j, "cruise_speed", p.cruise_speed);
  read_field(j, "present_min", p.present_min);
  read_field(j, "present_max", p.present_max);
  read_field(j, "absent_min", p.absent_min);
  read_field(j, "absent_max", p.absent_max);
  read_field(j, "background_count", p.background_count);
  read_field(j, "distractor", p.distractor);
  read_field(j, "jitter", p.jitter);
  return p;
}

std::string frame_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d.png", index);
  return buf;
}

ordered_json annotation_record(const char* split, const Frame& f) {
  ordered_json j;
  j["split"] = split;
  j["index"] = f.index;
  j["present"] = f.annotation.present;
  if (f.annotation.center) {
    j["cx"] = f.annotation.center->x;
    j["cy"] = f.annotation.center->y;
  } else {
    j["cx"] = nullptr;
    j["cy"] = nullptr;
  }
  return j;
}

void check_annotation(const Annotation& a, const std::string& where) {
  if (a.present && !a.center) fail(ErrorKind::kValidation, where + ": present target without center");
  if (!a.present && a.center) fail(ErrorKind::kValidation, where + ": center given for absent target");
  if (a.center) {
    auto in01 = [](double v) { return std::isfinite(v) && v >= 0.0 && v < 1.0; };
    if (!in01(a.center->x) || !in01(a.center->y))
      fail(ErrorKind::kValidation, where + ": center outside [0,1)");
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace

void GenParams::validate() const {
  require(frame_size >= 16 && frame_size <= 2048, ErrorKind::kConfig,
          "frame_size must be in [16, 2048]");
  require(train_frames >= 1, ErrorKind::kConfig, "train_frames must be positive");
  require(test_frames >= 2 && test_frames % 2 == 0, ErrorKind::kConfig,
          "test_frames must be a positive even number");
  require(sprite_min >= 2 && sprite_max >= sprite_min, ErrorKind::kConfig,
          "sprite size range must satisfy 2 <= sprite_min <= sprite_max");
  require(2 * sprite_max + 8 <= frame_size, ErrorKind::kConfig,
          "sprite too large for the frame");
  require(max_speed > 0 && std::isfinite(max_speed), ErrorKind::kConfig,
          "max_speed must be positive");
  require(cruise_speed > 0 && cruise_speed <= max_speed, ErrorKind::kConfig,
          "cruise_speed must be in (0, max_speed]");
  require(present_min >= 1 && present_max >= present_min, ErrorKind::kConfig,
          "present segment range invalid");
  require(absent_min >= 1 && absent_max >= absent_min, ErrorKind::kConfig,
          "absent segment range invalid");
  require(background_count >= 1 && background_count <= 64, ErrorKind::kConfig,
          "background_count must be in [1, 64]");
  require(jitter >= 0 && jitter <= 8, ErrorKind::kConfig, "jitter must be in [0, 8]");
}

void Scenario::validate() const {
  require(!train.empty(), ErrorKind::kValidation, "scenario has no train frames");
  require(!test.empty(), ErrorKind::kValidation, "scenario has no test frames");
  int w = frame_width(), h = frame_height();
  require(w > 0 && h > 0, ErrorKind::kValidation, "empty frame");
  int positives = 0;
  auto check = [&](const std::vector<Frame>& frames, const char* split) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const Frame& f = frames[i];
      std::string where = std::string(split) + " frame " + std::to_string(f.index);
      if (f.index != int(i) + 1)
        fail(ErrorKind::kValidation, std::string(split) + " indices must be contiguous from 1");
      if (f.image.width != w || f.image.height != h ||
          f.image.pixels.size() != std::size_t(w) * h * 3)
        fail(ErrorKind::kValidation, where + ": frame size mismatch");
      check_annotation(f.annotation, where);
    }
  };
  check(train, "train");
  check(test, "test");
  for (const Frame& f : test) positives += f.annotation.present ? 1 : 0;
  if (2 * positives != int(test.size()))
    fail(ErrorKind::kValidation, "unbalanced test set: " + std::to_string(positives) +
                                     " positive of " + std::to_string(test.size()));
}

Scenario generate_scenario(const GenParams& params, std::uint64_t seed) {
  params.validate();
  Scenario sc;
  sc.name = params.name;
  sc.seed = seed;
  sc.params = params;

  Shot train_shot(params, mix64(seed ^ 0x7472'6169'6eULL), 0, params.train_frames);
  sc.train.reserve(params.train_frames);
  for (int i = 0; i < params.train_frames; ++i) {
    RenderedFrame r = train_shot.next();
    sc.train.push_back({i + 1, std::move(r.image), r.annotation});
  }

  // Test frames: a separate shot over a different world, pared down to equal
  // positives and negatives. Negatives show no target pixels at all.
  const int half = params.test_frames / 2;
  const int shot_len = std::max(3 * params.test_frames, 4 * (params.present_max + params.absent_max));
  const int limit = 100 * params.test_frames + shot_len;
  Shot test_shot(params, mix64(seed ^ 0x7465'7374ULL), 1, shot_len);
  std::vector<RenderedFrame> pool;
  std::vector<int> pos, neg;
  for (int t = 0; t < limit; ++t) {
    if (t >= shot_len && int(pos.size()) >= half && int(neg.size()) >= half) break;
    RenderedFrame r = test_shot.next();
    if (r.annotation.present)
      pos.push_back(int(pool.size()));
    else if (r.target_pixels == 0)
      neg.push_back(int(pool.size()));
    pool.push_back(std::move(r));
  }
  if (int(pos.size()) < half || int(neg.size()) < half)
    fail(ErrorKind::kConfig, "presence schedule cannot produce a balanced test set");
  std::vector<int> picked = spread(pos, half);
  std::vector<int> picked_neg = spread(neg, half);
  picked.insert(picked.end(), picked_neg.begin(), picked_neg.end());
  std::sort(picked.begin(), picked.end());
  sc.test.reserve(picked.size());
  for (int k : picked) {
    int index = int(sc.test.size()) + 1;
    sc.test.push_back({index, std::move(pool[k].image), pool[k].annotation});
  }
  sc.validate();
  return sc;
}

void save_scenario(const Scenario& scenario, const fs::path& dir) {
  scenario.validate();
  std::error_code ec;
  fs::create_directories(dir / "train", ec);
  if (!ec) fs::create_directories(dir / "test", ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());

  std::string lines;
  for (const Frame& f : scenario.train) {
    write_png(f.image, dir / "train" / frame_name(f.index));
    lines += annotation_record("train", f).dump() + "\n";
  }
  for (const Frame& f : scenario.test) {
    write_png(f.image, dir / "test" / frame_name(f.index));
    lines += annotation_record("test", f).dump() + "\n";
  }
  write_text(dir / "annotations.jsonl", lines);

  ordered_json meta;
  meta["format_version"] = kFormatVersion;
  meta["name"] = scenario.name;
  meta["frame_width"] = scenario.frame_width();
  meta["frame_height"] = scenario.frame_height();
  meta["train_count"] = scenario.train.size();
  meta["test_count"] = scenario.test.size();
  meta["seed"] = scenario.seed ? ordered_json(*scenario.seed) : ordered_json(nullptr);
  meta["params"] = scenario.params ? params_to_json(*scenario.params) : ordered_json(nullptr);
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

Scenario load_scenario(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kIo, "not a scenario directory: " + dir.string());

  json meta;
  try {
    meta = json::parse(read_text(dir / "meta.json"));
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, "meta.json: " + std::string(e.what()));
  }
  Scenario sc;
  std::size_t train_count = 0, test_count = 0;
  try {
    int version = meta.at("format_version").get<int>();
    if (version != kFormatVersion)
      fail(ErrorKind::kParse, "meta.json: unsupported format_version " + std::to_string(version));
    sc.name = meta.value("name", std::string());
    train_count = meta.at("train_count").get<std::size_t>();
    test_count = meta.at("test_count").get<std::size_t>();
    if (auto it = meta.find("seed"); it != meta.end() && !it->is_null())
      sc.seed = it->get<std::uint64_t>();
    if (auto it = meta.find("params"); it != meta.end() && !it->is_null())
      sc.params = params_from_json(*it);
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, "meta.json: " + std::string(e.what()));
  }

  std::istringstream lines(read_text(dir / "annotations.jsonl"));
  std::vector<std::pair<int, Annotation>> train_ann, test_ann;
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = "annotations.jsonl line " + std::to_string(line_no);
    try {
      json rec = json::parse(line);
      std::string split = rec.at("split").get<std::string>();
      int index = rec.at("index").get<int>();
      Annotation a;
      a.present = rec.at("present").get<bool>();
      auto cx = rec.find("cx"), cy = rec.find("cy");
      bool has_x = cx != rec.end() && !cx->is_null(), has_y = cy != rec.end() && !cy->is_null();
      if (has_x != has_y) fail(ErrorKind::kParse, where + ": cx and cy must appear together");
      if (has_x) a.center = Point2{cx->get<double>(), cy->get<double>()};
      check_annotation(a, where);
      if (split == "train")
        train_ann.emplace_back(index, a);
      else if (split == "test")
        test_ann.emplace_back(index, a);
      else
        fail(ErrorKind::kParse, where + ": unknown split '" + split + "'");
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, where + ": " + e.what());
    }
  }

  auto build = [&](std::vector<std::pair<int, Annotation>>& ann, const char* split,
                   std::size_t expected) {
    std::sort(ann.begin(), ann.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (ann.size() != expected)
      fail(ErrorKind::kValidation, std::string(split) + ": meta.json declares " +
                                       std::to_string(expected) + " frames, annotations have " +
                                       std::to_string(ann.size()));
    std::vector<Frame> frames;
    frames.reserve(ann.size());
    for (std::size_t i = 0; i < ann.size(); ++i) {
      if (ann[i].first != int(i) + 1)
        fail(ErrorKind::kValidation, std::string(split) + " indices must be contiguous from 1");
      frames.push_back({ann[i].first, read_png(dir / split / frame_name(ann[i].first)),
                        ann[i].second});
    }
    return frames;
  };
  sc.train = build(train_ann, "train", train_count);
  sc.test = build(test_ann, "test", test_count);
  sc.validate();
  return sc;
}

}  // namespace toot
