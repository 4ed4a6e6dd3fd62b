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


// Ground-station session logic, independent of the transport.
//
// A Station owns one SessionEngine and a frame source. Each frame it sends
// opens a training round that stays open until the next frame is due;
// operator tags and clicks in between train on the frame they reference,
// which must still be in the sliding window.

#ifndef TOOT_SERVICE_STATION_HPP
#define TOOT_SERVICE_STATION_HPP

#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "protocol.hpp"
#include "trainer.hpp"

namespace toot::station {

struct SourceFrame {
  int index = 0;
  std::shared_ptr<const RgbImage> image;
  FrameInput input;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Next frame, or nothing once the stream is over.
  virtual std::optional<SourceFrame> next() = 0;
  virtual void rewind() = 0;
  virtual std::optional<int> length() const { return std::nullopt; }
};

/// Replays the train split of a prepared scenario.
class ScenarioSource : public FrameSource {
 public:
  explicit ScenarioSource(std::shared_ptr<const PreparedScenario> scenario);
  std::optional<SourceFrame> next() override;
  void rewind() override { pos_ = 0; }
  std::optional<int> length() const override { return scenario_->n(); }

 private:
  std::shared_ptr<const PreparedScenario> scenario_;
  int pos_ = 0;
};

/// PNG files of a directory in name order; frames carry no ground truth.
class DirectorySource : public FrameSource {
 public:
  DirectorySource(const std::filesystem::path& dir, const ArchConfig& arch,
                  const TrackerConfig& tracker = {});
  std::optional<SourceFrame> next() override;
  void rewind() override { pos_ = 0; }
  std::optional<int> length() const override { return int(files_.size()); }

 private:
  std::vector<std::filesystem::path> files_;
  ArchConfig arch_;
  TrackerConfig tracker_;
  std::size_t pos_ = 0;
};

enum class Pacing { kLockstep, kPaced };
const char* to_string(Pacing p);

struct StationConfig {
  StrategyConfig strategy;  // online strategies only
  std::uint64_t seed = 1;   // run seed, as in run_session
  Pacing pacing = Pacing::kPaced;
  double fps = 5.0;
  int window = 16;
  int display_size = 224;
  std::optional<std::filesystem::path> audit_dir;  // written when the stream ends

  void validate() const;
};

class Station {
 public:
  /// With a test set the station tracks accuracy and keeps a metrics trace.
  Station(std::shared_ptr<FrameSource> source, const ArchConfig& arch, StationConfig config,
          std::optional<TestSet> test = std::nullopt);

  proto::HelloMessage hello() const;

  /// Applies one operator message and returns the replies.
  std::vector<proto::DownMessage> handle(const proto::UpMessage& msg);

  /// Closes the open round, drops `skip` frames and sends the next one, or
  /// the end message when the source runs out.
  std::vector<proto::DownMessage> advance(int skip = 0);

  bool started() const { return started_; }
  bool running() const { return running_; }
  bool ended() const { return ended_; }
  const StationConfig& config() const { return config_; }
  const SessionEngine& engine() const { return *engine_; }
  const MetricsTrace& trace() const { return trace_; }
  int dropped_frames() const { return dropped_; }

  /// trace_<strategy>.csv (with a test set) and interactions.jsonl.
  void write_audit(const std::filesystem::path& dir) const;

 private:
  struct Held {
    std::int64_t seq = 0;
    SourceFrame frame;
  };

  void restart();
  const Held* find(std::int64_t seq) const;
  proto::FrameMessage frame_message(const Held& held) const;
  std::vector<proto::DownMessage> interact(const proto::UpMessage& msg);

  std::shared_ptr<FrameSource> source_;
  ArchConfig arch_;
  StationConfig config_;
  std::optional<TestSet> test_;
  std::optional<SessionEngine> engine_;
  MetricsTrace trace_;
  StreamingMetrics metrics_{0.0};
  std::deque<Held> window_;
  std::int64_t next_seq_ = 1;
  int rounds_ = 0;
  int dropped_ = 0;
  bool started_ = false;
  bool running_ = false;
  bool ended_ = false;
};

}  // namespace toot::station

#endif  // TOOT_SERVICE_STATION_HPP
