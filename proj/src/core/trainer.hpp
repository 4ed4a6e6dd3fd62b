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

// The online training loop.
//
// Every frame of the stream is one round: the tracker (when running) is
// advanced and may emit a training event, the frame is recognized, the user
// may tag or click it, and each training event is exactly one gradient
// update. Training examples are stored in a history database after use and
// re-sampled into later mini-batches.
//
// SessionEngine holds the per-session state and is driven either by the
// simulated user (run_session) or by the ground-station service.

#ifndef TOOT_CORE_TRAINER_HPP
#define TOOT_CORE_TRAINER_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "metrics.hpp"
#include "nn.hpp"
#include "scenario.hpp"
#include "tracker.hpp"

namespace toot {

enum class Strategy { kOffline, kSemiOnline, kLocalized, kOfLocalized };
const char* to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

enum class ActionKind { kNone, kTagPositive, kTagNegative, kClick };
const char* to_string(ActionKind k);

enum class Source { kUser, kOpticalFlow };
const char* to_string(Source s);

struct UserAction {
  ActionKind kind = ActionKind::kNone;
  Point2 click;  // normalized, meaningful for kClick

  bool operator==(const UserAction&) const = default;
};

struct InteractionRecord {
  int frame = 0;
  ActionKind kind = ActionKind::kNone;
  std::optional<Point2> click;
  Source source = Source::kUser;

  bool operator==(const InteractionRecord&) const = default;
};

struct StrategyConfig {
  Strategy strategy = Strategy::kSemiOnline;
  int batch_size = 8;
  int runs = 10;
  std::uint64_t seed = 1;
  std::optional<double> stop_accuracy;  // stop once A_i >= this
  int eval_every = 1;                   // evaluate on every k-th frame with an update
  double mask_radius = 0.0;             // <= 0 selects the default for the grid
  AdadeltaConfig optimizer;
  TrackerConfig tracker;

  /// Short name used in file names and traces, e.g. "of_localized".
  std::string label() const { return to_string(strategy); }
  void validate() const;
};

// ---------------------------------------------------------------------------
// History and mini-batches

class HistoryDB {
 public:
  struct Entry {
    TrainingExample example;
    Source source = Source::kUser;
    int frame = 0;
  };

  /// Unmasked examples go to the label partitions used by semi-online
  /// batches, masked ones to those used by localized batches.
  void add(const TrainingExample& example, Source source, int frame);
  const std::vector<Entry>& partition(Label label, bool masked) const;
  std::size_t size() const;
  void clear();

 private:
  std::array<std::vector<Entry>, 4> parts_;
};

using MiniBatch = std::vector<TrainingExample>;

/// The incoming example plus up to b - 1 history draws, aiming at b/2 of each
/// label. A label partition that runs short leaves the batch short.
MiniBatch build_batch_semi_online(const HistoryDB& history, const TrainingExample& incoming,
                                  int batch_size, std::mt19937_64& rng);

/// Positive-masked and negative-masked copies of the image, then b - 2 masked
/// history draws balanced by label.
MiniBatch build_batch_localized(const HistoryDB& history,
                                const std::shared_ptr<const PlanarImage>& image, GridCell click,
                                int batch_size, int grid_side, double radius, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Simulated user

/// Replays ground truth the way a disciplined operator would.
UserAction simulated_user_step(const Annotation& annotation, TrackStatus tracker,
                               Strategy strategy, int frame_index);

// ---------------------------------------------------------------------------
// Session engine

/// A frame as the engine consumes it: network input plus tracker pyramid.
struct FrameInput {
  int index = 0;
  int width = 0;
  int height = 0;
  std::shared_ptr<const PlanarImage> planar;
  std::shared_ptr<const Pyramid> pyramid;
};

FrameInput make_frame_input(const RgbImage& frame, int index, const ArchConfig& arch,
                            const TrackerConfig& tracker);

/// Test set ready for repeated evaluation.
struct TestSet {
  std::shared_ptr<const EvalSet> images;
  std::vector<Label> labels;
};

/// Frames and test set of a scenario, converted once and shared read-only by
/// every session on it.
struct PreparedScenario {
  std::shared_ptr<const Scenario> scenario;
  std::vector<FrameInput> train;
  TestSet test;

  int n() const { return int(train.size()); }
};

PreparedScenario prepare_scenario(std::shared_ptr<const Scenario> scenario,
                                  const ArchConfig& arch, const TrackerConfig& tracker = {});

struct SessionSettings {
  int batch_size = 8;
  bool optical_flow = false;  // clicks start the tracker; tracked frames train
  int eval_every = 1;
  double mask_radius = 0.0;
  AdadeltaConfig optimizer;
  TrackerConfig tracker;
};

/// Engine settings for an online strategy; optical flow follows of_localized.
SessionSettings session_settings(const StrategyConfig& config);

struct RoundOutcome {
  int frame = 0;
  int u = 0;
  int of_events = 0;
  int trained = 0;
  std::optional<double> accuracy;  // in force after this round
  bool evaluated = false;
};

class SessionEngine {
 public:
  /// `test` may be empty (no ground truth); accuracy is then not tracked.
  SessionEngine(ModelState model, SessionSettings settings, std::uint64_t sampling_seed,
                std::optional<TestSet> test = std::nullopt);

  /// Starts round i: advances the tracker onto the frame and, if it holds,
  /// trains on the tracked position.
  void begin_round(const FrameInput& frame);

  /// Recognition with the model in force for this round.
  Prediction recognize() const;
  std::vector<double> cam(int class_index = 1) const;

  /// User interactions on the current frame; each is one training event.
  void tag(Label label);
  void click(Point2 uv);
  void apply(const UserAction& action);

  /// Interactions on an earlier frame the caller still holds. They count
  /// toward the open round; a click re-seeds the tracker on that frame.
  void tag(const FrameInput& frame, Label label);
  void click(const FrameInput& frame, Point2 uv);

  /// Ends the round, evaluating the test set when the cadence asks for it.
  RoundOutcome end_round(bool force_eval = false);

  /// Drops the model back to `model`, clears history and tracker.
  void reset(ModelState model);

  const ModelState& model() const { return model_; }
  const TrackerState& tracker() const { return tracker_; }
  const HistoryDB& history() const { return history_; }
  const std::vector<InteractionRecord>& interactions() const { return interactions_; }
  std::optional<double> accuracy() const { return accuracy_; }
  bool in_round() const { return in_round_; }
  int frame_index() const { return frame_ ? frame_->index : 0; }
  const SessionSettings& settings() const { return settings_; }

 private:
  void train_localized(const FrameInput& frame, Point2 uv, Source source);
  void train_semi_online(const FrameInput& frame, Label label);
  void require_round(const char* what) const;

  ModelState model_;
  SessionSettings settings_;
  std::mt19937_64 rng_;
  std::optional<TestSet> test_;
  HistoryDB history_;
  TrackerState tracker_;
  std::optional<FrameInput> frame_;
  std::optional<FrameInput> tracked_frame_;  // frame the tracker state refers to
  std::vector<InteractionRecord> interactions_;
  std::optional<double> accuracy_;
  RoundOutcome round_;
  bool in_round_ = false;
  bool dirty_ = false;  // updates since the last evaluation
};

// ---------------------------------------------------------------------------
// Whole sessions

/// Seeds derived from the run seed; shared by every strategy of the same run
/// so that all of them start from the same weights.
std::uint64_t model_seed(std::uint64_t run_seed);
std::uint64_t sampling_seed(std::uint64_t run_seed);
/// Run seed for run r of an experiment seeded with `base`.
std::uint64_t run_seed(std::uint64_t base, int run);

struct SessionResult {
  MetricsTrace trace;
  StreamingMetrics metrics{0.0};  // computed alongside the run
  std::vector<InteractionRecord> interactions;
  ModelState model;
};

/// Trace with only A_0 filled in, labelled after the strategy.
MetricsTrace start_trace(const StrategyConfig& config, std::uint64_t seed, double a0);
/// Appends one round; the outcome must carry an accuracy.
void record_round(MetricsTrace& trace, StreamingMetrics& metrics, const RoundOutcome& round);

/// One run of one strategy over the scenario with the simulated user.
SessionResult run_session(const PreparedScenario& scenario, const StrategyConfig& config,
                          const ArchConfig& arch, std::uint64_t seed);

/// Reference strategy: n rounds of shuffled, label-balanced mini-batches over
/// the whole train set, with every round counted as an interaction.
SessionResult offline_train(const PreparedScenario& scenario, int batch_size, int rounds,
                            const ArchConfig& arch, std::uint64_t seed,
                            const StrategyConfig& config = {});

/// JSON-lines audit log of interaction records.
std::string interactions_jsonl(const std::vector<InteractionRecord>& records);

}  // namespace toot

#endif  // TOOT_CORE_TRAINER_HPP
