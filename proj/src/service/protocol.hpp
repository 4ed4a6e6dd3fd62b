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


// Wire format of the ground-station channel. One JSON object per message,
// tagged by "type". Encoding uses a fixed field order; decoding ignores
// fields it does not know.

#ifndef TOOT_SERVICE_PROTOCOL_HPP
#define TOOT_SERVICE_PROTOCOL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tracker.hpp"

namespace toot::proto {

// Down: server to operator.

struct Scores {
  double positive = 0.0;
  double negative = 0.0;
  bool operator==(const Scores&) const = default;
};

/// Tracker box in normalized frame coordinates, top-left corner plus size.
struct NormBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  bool operator==(const NormBox&) const = default;
};

struct TrackerInfo {
  TrackStatus status = TrackStatus::kIdle;
  std::optional<NormBox> bbox;  // present while the tracker is active
  bool operator==(const TrackerInfo&) const = default;
};

struct FrameMessage {
  std::int64_t seq = 0;
  int frame_index = 0;
  std::string image;                    // base64 PNG display copy
  std::vector<std::vector<double>> cam; // S rows of S values in [0,1]
  Scores scores;
  std::uint64_t model_version = 0;
  TrackerInfo tracker;
  std::optional<double> accuracy;       // test accuracy of the model in force
  bool operator==(const FrameMessage&) const = default;
};

struct HelloMessage {
  std::string mode;  // "lockstep" | "paced"
  double fps = 0.0;
  int window = 0;
  std::optional<int> frames;  // stream length when known
  int grid_side = 0;
  std::string strategy;
  bool operator==(const HelloMessage&) const = default;
};

struct ErrorMessage {
  std::string code;
  std::string message;
  std::optional<std::int64_t> seq;
  bool operator==(const ErrorMessage&) const = default;
};

struct EndMessage {
  int frames = 0;
  int interactions = 0;
  std::uint64_t model_version = 0;
  std::optional<double> accuracy;
  bool operator==(const EndMessage&) const = default;
};

using DownMessage = std::variant<HelloMessage, FrameMessage, ErrorMessage, EndMessage>;

// Up: operator to server.

enum class TagLabel { kPositive, kNegative };

struct TagMessage {
  std::int64_t seq = 0;
  TagLabel label = TagLabel::kPositive;
  bool operator==(const TagMessage&) const = default;
};

struct ClickMessage {
  std::int64_t seq = 0;
  double u = 0.0;
  double v = 0.0;
  bool operator==(const ClickMessage&) const = default;
};

enum class ControlAction { kStart, kPause, kReset, kStep };
const char* to_string(ControlAction a);

struct ControlMessage {
  ControlAction action = ControlAction::kStart;
  bool operator==(const ControlMessage&) const = default;
};

using UpMessage = std::variant<TagMessage, ClickMessage, ControlMessage>;

std::string encode(const DownMessage& msg);
std::string encode(const UpMessage& msg);

/// Both throw Error(kProtocol) naming the offending field.
DownMessage decode_down(std::string_view text);
UpMessage decode_up(std::string_view text);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Min-max normalizes a row-major S x S map into rows; a flat map becomes zeros.
std::vector<std::vector<double>> normalize_cam(const std::vector<double>& cam, int side);

}  // namespace toot::proto

#endif  // TOOT_SERVICE_PROTOCOL_HPP
