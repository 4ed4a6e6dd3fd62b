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

// Time-ordered training scenarios: a train sequence with per-frame ground
// truth and a balanced test set.
//
// On disk a scenario is a directory:
//   train/000001.png ...     train frames, indices contiguous from 1
//   test/000001.png ...      test frames
//   annotations.jsonl        {"split","index","present","cx","cy"} per frame
//   meta.json                format version, name, counts, seed and params
//
// cx, cy are normalized to [0,1) and null when the target is absent.

#ifndef TOOT_CORE_SCENARIO_HPP
#define TOOT_CORE_SCENARIO_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "image.hpp"
#include "nn.hpp"
#include "tracker.hpp"

namespace toot {

struct Annotation {
  bool present = false;
  std::optional<Point2> center;  // normalized (u, v)

  bool operator==(const Annotation&) const = default;
};

struct Frame {
  int index = 0;
  RgbImage image;
  Annotation annotation;

  Label label() const { return annotation.present ? Label::kPositive : Label::kNegative; }
  bool operator==(const Frame&) const = default;
};

struct GenParams {
  std::string name = "synthetic";
  int frame_size = 56;
  int train_frames = 400;
  int test_frames = 200;
  int sprite_min = 11;
  int sprite_max = 14;
  double max_speed = 6.0;    // px per frame, bound on target displacement
  double cruise_speed = 2.5; // typical target speed, <= max_speed
  int present_min = 30;
  int present_max = 70;
  int absent_min = 12;
  int absent_max = 30;
  int background_count = 4;
  bool distractor = false;
  int jitter = 1;            // px per frame of camera translation, per axis

  void validate() const;
  bool operator==(const GenParams&) const = default;
};

struct Scenario {
  std::string name;
  std::vector<Frame> train;
  std::vector<Frame> test;
  std::optional<std::uint64_t> seed;
  std::optional<GenParams> params;

  int frame_width() const { return train.empty() ? 0 : train.front().image.width; }
  int frame_height() const { return train.empty() ? 0 : train.front().image.height; }

  /// Checks index contiguity, annotation invariants, frame sizes and test balance.
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

Scenario generate_scenario(const GenParams& params, std::uint64_t seed);

void save_scenario(const Scenario& scenario, const std::filesystem::path& dir);
Scenario load_scenario(const std::filesystem::path& dir);

}  // namespace toot

#endif  // TOOT_CORE_SCENARIO_HPP
