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

#ifndef TOOT_CORE_IMAGE_HPP
#define TOOT_CORE_IMAGE_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace toot {

/// Interleaved 8-bit RGB frame, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &pixels[(std::size_t(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(std::size_t(y) * width + x) * 3];
  }

  bool operator==(const RgbImage&) const = default;
};

/// Planar (CHW) float image in [0,1], the network's input representation.
struct PlanarImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 * height * width

  bool operator==(const PlanarImage&) const = default;
};

/// Single-channel float image, intensities in [0,1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  float operator()(int x, int y) const { return data[std::size_t(y) * width + x]; }
  float& operator()(int x, int y) { return data[std::size_t(y) * width + x]; }
};

PlanarImage to_planar(const RgbImage& img);

/// Luma conversion with 0.299/0.587/0.114 weights.
GrayImage to_gray(const RgbImage& img);

/// Nearest-neighbour resize; used for display copies.
RgbImage resize_nearest(const RgbImage& img, int width, int height);

std::vector<std::uint8_t> encode_png(const RgbImage& img);
RgbImage decode_png(const std::vector<std::uint8_t>& bytes);

void write_png(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

}  // namespace toot

#endif  // TOOT_CORE_IMAGE_HPP
