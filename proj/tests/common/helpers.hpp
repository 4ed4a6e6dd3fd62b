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

#ifndef TOOT_TESTS_HELPERS_HPP
#define TOOT_TESTS_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "error.hpp"
#include "image.hpp"

namespace toot::testing {

inline std::shared_ptr<const PlanarImage> random_planar(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  auto img = std::make_shared<PlanarImage>();
  img->width = img->height = side;
  img->data.resize(std::size_t(3) * side * side);
  for (float& v : img->data) v = u(rng);
  return img;
}

// Smooth, well-textured intensity pattern, defined everywhere on the plane.
inline double texture(double x, double y) {
  return 0.5 + 0.2 * std::sin(0.45 * x + 0.3 * std::cos(0.21 * y)) +
         0.15 * std::sin(0.37 * y - 0.5 * x * 0.3) + 0.1 * std::cos(0.9 * x + 0.7 * y);
}

// Frame showing texture(x + dx, y + dy): the content moves by (-dx, -dy).
inline RgbImage textured_frame(int w, int h, double dx = 0.0, double dy = 0.0) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto v = std::uint8_t(std::lround(255.0 * std::clamp(texture(x + dx, y + dy), 0.0, 1.0)));
      std::uint8_t* p = img.at(x, y);
      p[0] = p[1] = p[2] = v;
    }
  return img;
}

inline RgbImage flat_frame(int w, int h, std::uint8_t v) {
  RgbImage img(w, h);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

// Kind of the toot::Error thrown by fn, if any.
template <typename Fn>
std::optional<ErrorKind> error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("toot_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace toot::testing

#endif  // TOOT_TESTS_HELPERS_HPP
