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

#include "trainer.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "error.hpp"

namespace toot {

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// k distinct entries, uniformly at random, in draw order.
void draw_into(MiniBatch& batch, const std::vector<HistoryDB::Entry>& from, int k,
               std::mt19937_64& rng) {
  const int m = int(from.size());
  k = std::min(k, m);
  if (k <= 0) return;
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, m - 1);
    std::swap(idx[i], idx[pick(rng)]);
    batch.push_back(from[idx[i]].example);
  }
}

Point2 clamp_uv(Point2 uv) {
  const double hi = std::nextafter(1.0, 0.0);
  return {std::clamp(uv.x, 0.0, hi), std::clamp(uv.y, 0.0, hi)};
}

std::shared_ptr<const PlanarImage> network_input(const RgbImage& frame, const ArchConfig& arch) {
  if (frame.width == arch.input_side && frame.height == arch.input_side)
    return std::make_shared<const PlanarImage>(to_planar(frame));
  return std::make_shared<const PlanarImage>(
      to_planar(resize_nearest(frame, arch.input_side, arch.input_side)));
}

}  // namespace

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kOffline: return "offline";
    case Strategy::kSemiOnline: return "semi_online";
    case Strategy::kLocalized: return "localized";
    case Strategy::kOfLocalized: return "of_localized";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "offline") return Strategy::kOffline;
  if (name == "semi_online") return Strategy::kSemiOnline;
  if (name == "localized") return Strategy::kLocalized;
  if (name == "of_localized") return Strategy::kOfLocalized;
  fail(ErrorKind::kConfig, "unknown strategy '" + std::string(name) + "'");
}

const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::kNone: return "none";
    case ActionKind::kTagPositive: return "tag_positive";
    case ActionKind::kTagNegative: return "tag_negative";
    case ActionKind::kClick: return "click";
  }
  return "?";
}

const char* to_string(Source s) { return s == Source::kUser ? "user" : "optical_flow"; }

void StrategyConfig::validate() const {
  require(batch_size >= 2 && batch_size % 2 == 0, ErrorKind::kConfig,
          "batch size must be even and at least 2");
  require(runs >= 1, ErrorKind::kConfig, "run count must be at least 1");
  require(eval_every >= 1, ErrorKind::kConfig, "eval_every must be at least 1");
  require(optimizer.rho > 0.0 && optimizer.rho < 1.0, ErrorKind::kConfig, "rho must be in (0,1)");
  require(optimizer.epsilon > 0.0, ErrorKind::kConfig, "epsilon must be positive");
  if (stop_accuracy)
    require(*stop_accuracy >= 0.0 && *stop_accuracy <= 1.0, ErrorKind::kConfig,
            "stop accuracy must be in [0,1]");
}

// ---------------------------------------------------------------------------

void HistoryDB::add(const TrainingExample& example, Source source, int frame) {
  const int slot = index_of(example.label) * 2 + (example.mask ? 1 : 0);
  parts_[slot].push_back({example, source, frame});
}

const std::vector<HistoryDB::Entry>& HistoryDB::partition(Label label, bool masked) const {
  return parts_[index_of(label) * 2 + (masked ? 1 : 0)];
}

std::size_t HistoryDB::size() const {
  std::size_t n = 0;
  for (const auto& p : parts_) n += p.size();
  return n;
}

void HistoryDB::clear() {
  for (auto& p : parts_) p.clear();
}

MiniBatch build_batch_semi_online(const HistoryDB& history, const TrainingExample& incoming,
                                  int batch_size, std::mt19937_64& rng) {
  require(batch_size >= 2 && batch_size % 2 == 0, ErrorKind::kConfig,
          "batch size must be even and at least 2");
  MiniBatch batch;
  batch.reserve(batch_size);
  batch.push_back(incoming);
  const int half = batch_size / 2;
  const bool pos = incoming.label == Label::kPositive;
  draw_into(batch, history.partition(Label::kPositive, false), pos ? half - 1 : half, rng);
  draw_into(batch, history.partition(Label::kNegative, false), pos ? half : half - 1, rng);
  return batch;
}

MiniBatch build_batch_localized(const HistoryDB& history,
                                const std::shared_ptr<const PlanarImage>& image, GridCell click,
                                int batch_size, int grid_side, double radius,
                                std::mt19937_64& rng) {
  require(batch_size >= 2 && batch_size % 2 == 0, ErrorKind::kConfig,
          "batch size must be even and at least 2");
  MaskPair masks = masks_for_click(click, radius, grid_side);
  MiniBatch batch;
  batch.reserve(batch_size);
  batch.push_back({image, Label::kPositive, std::make_shared<const LayerMask>(masks.positive)});
  batch.push_back({image, Label::kNegative, std::make_shared<const LayerMask>(masks.negative)});
  const int rest = (batch_size - 2) / 2;
  draw_into(batch, history.partition(Label::kPositive, true), rest, rng);
  draw_into(batch, history.partition(Label::kNegative, true), rest, rng);
  return batch;
}

UserAction simulated_user_step(const Annotation& annotation, TrackStatus tracker,
                               Strategy strategy, int /*frame_index*/) {
  UserAction a;
  switch (strategy) {
    case Strategy::kOffline:
      break;
    case Strategy::kSemiOnline:
      a.kind = annotation.present ? ActionKind::kTagPositive : ActionKind::kTagNegative;
      break;
    case Strategy::kLocalized:
      if (annotation.present) a.kind = ActionKind::kClick;
      break;
    case Strategy::kOfLocalized:
      if (annotation.present && tracker != TrackStatus::kActive) a.kind = ActionKind::kClick;
      break;
  }
  if (a.kind == ActionKind::kClick) a.click = *annotation.center;
  return a;
}

// ---------------------------------------------------------------------------

FrameInput make_frame_input(const RgbImage& frame, int index, const ArchConfig& arch,
                            const TrackerConfig& tracker) {
  FrameInput f;
  f.index = index;
  f.width = frame.width;
  f.height = frame.height;
  f.planar = network_input(frame, arch);
  f.pyramid = std::make_shared<const Pyramid>(to_gray(frame), tracker.pyramid_levels);
  return f;
}

PreparedScenario prepare_scenario(std::shared_ptr<const Scenario> scenario,
                                  const ArchConfig& arch, const TrackerConfig& tracker) {
  require(scenario != nullptr, ErrorKind::kUsage, "null scenario");
  scenario->validate();
  arch.validate();
  PreparedScenario p;
  p.scenario = scenario;
  p.train.reserve(scenario->train.size());
  for (const Frame& f : scenario->train)
    p.train.push_back(make_frame_input(f.image, f.index, arch, tracker));
  std::vector<std::shared_ptr<const PlanarImage>> images;
  for (const Frame& f : scenario->test) {
    images.push_back(network_input(f.image, arch));
    p.test.labels.push_back(f.label());
  }
  p.test.images = std::make_shared<const EvalSet>(arch, std::move(images));
  return p;
}

SessionSettings session_settings(const StrategyConfig& config) {
  SessionSettings settings;
  settings.batch_size = config.batch_size;
  settings.optical_flow = config.strategy == Strategy::kOfLocalized;
  settings.eval_every = config.eval_every;
  settings.mask_radius = config.mask_radius;
  settings.optimizer = config.optimizer;
  settings.tracker = config.tracker;
  return settings;
}

SessionEngine::SessionEngine(ModelState model, SessionSettings settings,
                             std::uint64_t sampling_seed, std::optional<TestSet> test)
    : model_(std::move(model)), settings_(settings), rng_(sampling_seed), test_(std::move(test)) {
  require(settings_.batch_size >= 2 && settings_.batch_size % 2 == 0, ErrorKind::kConfig,
          "batch size must be even and at least 2");
  require(settings_.eval_every >= 1, ErrorKind::kConfig, "eval_every must be at least 1");
  if (settings_.mask_radius <= 0.0) settings_.mask_radius = default_mask_radius(model_.arch.grid_side);
  if (test_ && test_->images) accuracy_ = toot::accuracy(model_, *test_->images, test_->labels);
  else test_.reset();
}

void SessionEngine::require_round(const char* what) const {
  if (!in_round_) fail(ErrorKind::kUsage, std::string(what) + " outside a round");
}

void SessionEngine::begin_round(const FrameInput& frame) {
  if (in_round_) fail(ErrorKind::kUsage, "begin_round while a round is open");
  require(frame.planar && frame.pyramid, ErrorKind::kUsage, "incomplete frame input");
  frame_ = frame;
  in_round_ = true;
  round_ = RoundOutcome{};
  round_.frame = frame.index;

  if (!settings_.optical_flow || tracker_.status != TrackStatus::kActive || !tracked_frame_) return;
  require(tracked_frame_->width == frame.width && tracked_frame_->height == frame.height,
          ErrorKind::kUsage, "frame size changed under an active tracker");
  tracker_ = update_track(tracker_, *tracked_frame_->pyramid, *frame.pyramid, frame.width,
                          frame.height, settings_.tracker);
  tracked_frame_ = frame;
  if (tracker_.status != TrackStatus::kActive) return;
  Point2 uv = clamp_uv({tracker_.bbox.cx / frame.width, tracker_.bbox.cy / frame.height});
  train_localized(frame, uv, Source::kOpticalFlow);
  round_.of_events += 1;
  interactions_.push_back({frame.index, ActionKind::kClick, uv, Source::kOpticalFlow});
}

Prediction SessionEngine::recognize() const {
  require_round("recognize");
  return predict(model_, *frame_->planar);
}

std::vector<double> SessionEngine::cam(int class_index) const {
  require_round("cam");
  return cam_map(model_, *frame_->planar, class_index);
}

void SessionEngine::train_localized(const FrameInput& frame, Point2 uv, Source source) {
  const int S = model_.arch.grid_side;
  GridCell cell = click_to_cell(uv.x, uv.y, S);
  MiniBatch batch =
      build_batch_localized(history_, frame.planar, cell, settings_.batch_size, S,
                            settings_.mask_radius, rng_);
  train_step(model_, batch, settings_.optimizer);
  history_.add(batch[0], source, frame.index);
  history_.add(batch[1], source, frame.index);
  round_.trained += 1;
  dirty_ = true;
}

void SessionEngine::train_semi_online(const FrameInput& frame, Label label) {
  TrainingExample incoming{frame.planar, label, nullptr};
  MiniBatch batch = build_batch_semi_online(history_, incoming, settings_.batch_size, rng_);
  train_step(model_, batch, settings_.optimizer);
  history_.add(incoming, Source::kUser, frame.index);
  round_.trained += 1;
  dirty_ = true;
}

void SessionEngine::tag(Label label) {
  require_round("tag");
  tag(*frame_, label);
}

void SessionEngine::tag(const FrameInput& frame, Label label) {
  require_round("tag");
  require(bool(frame.planar), ErrorKind::kUsage, "incomplete frame input");
  train_semi_online(frame, label);
  round_.u = 1;
  interactions_.push_back({frame.index,
                           label == Label::kPositive ? ActionKind::kTagPositive
                                                     : ActionKind::kTagNegative,
                           std::nullopt, Source::kUser});
}

void SessionEngine::click(Point2 uv) {
  require_round("click");
  click(*frame_, uv);
}

void SessionEngine::click(const FrameInput& frame, Point2 uv) {
  require_round("click");
  require(frame.planar && frame.pyramid, ErrorKind::kUsage, "incomplete frame input");
  if (!(uv.x >= 0.0 && uv.x < 1.0 && uv.y >= 0.0 && uv.y < 1.0))
    fail(ErrorKind::kUsage, "click outside [0,1)");
  train_localized(frame, uv, Source::kUser);
  round_.u = 1;
  interactions_.push_back({frame.index, ActionKind::kClick, uv, Source::kUser});
  if (settings_.optical_flow) {
    tracker_ = init_track(frame.width, frame.height, {uv.x * frame.width, uv.y * frame.height},
                          0.0, settings_.tracker, frame.index);
    tracked_frame_ = frame;
  }
}

void SessionEngine::apply(const UserAction& action) {
  switch (action.kind) {
    case ActionKind::kNone: break;
    case ActionKind::kTagPositive: tag(Label::kPositive); break;
    case ActionKind::kTagNegative: tag(Label::kNegative); break;
    case ActionKind::kClick: click(action.click); break;
  }
}

RoundOutcome SessionEngine::end_round(bool force_eval) {
  require_round("end_round");
  if (test_ && dirty_ && (force_eval || frame_->index % settings_.eval_every == 0)) {
    accuracy_ = toot::accuracy(model_, *test_->images, test_->labels);
    dirty_ = false;
    round_.evaluated = true;
  }
  round_.accuracy = accuracy_;
  in_round_ = false;
  return round_;
}

void SessionEngine::reset(ModelState model) {
  model_ = std::move(model);
  history_.clear();
  tracker_ = TrackerState{};
  tracked_frame_.reset();
  frame_.reset();
  in_round_ = false;
  dirty_ = false;
  interactions_.clear();
  if (test_) accuracy_ = toot::accuracy(model_, *test_->images, test_->labels);
}

// ---------------------------------------------------------------------------

std::uint64_t model_seed(std::uint64_t run_seed) { return mix64(run_seed ^ 0x6d6f64656cULL); }
std::uint64_t sampling_seed(std::uint64_t run_seed) { return mix64(run_seed ^ 0x73616d706cULL); }
std::uint64_t run_seed(std::uint64_t base, int run) {
  return mix64(base + 0x9e3779b97f4a7c15ULL * std::uint64_t(run + 1));
}

MetricsTrace start_trace(const StrategyConfig& config, std::uint64_t seed, double a0) {
  MetricsTrace t;
  t.strategy = config.label();
  t.batch_size = config.batch_size;
  t.seed = seed;
  t.A.push_back(a0);
  return t;
}

void record_round(MetricsTrace& t, StreamingMetrics& m, const RoundOutcome& r) {
  require(r.accuracy.has_value(), ErrorKind::kUsage, "round outcome without accuracy");
  t.u.push_back(r.u);
  t.of_events.push_back(r.of_events);
  t.trained.push_back(r.trained);
  t.A.push_back(*r.accuracy);
  m.push(r.u, *r.accuracy);
}

SessionResult run_session(const PreparedScenario& scenario, const StrategyConfig& config,
                          const ArchConfig& arch, std::uint64_t seed) {
  config.validate();
  if (config.strategy == Strategy::kOffline)
    return offline_train(scenario, config.batch_size, scenario.n(), arch, seed, config);

  SessionEngine engine(init_model(arch, model_seed(seed)), session_settings(config),
                       sampling_seed(seed), scenario.test);

  SessionResult result;
  result.trace = start_trace(config, seed, *engine.accuracy());
  result.metrics = StreamingMetrics(*engine.accuracy());
  const int n = scenario.n();
  try {
    for (int i = 1; i <= n; ++i) {
      const FrameInput& frame = scenario.train[i - 1];
      engine.begin_round(frame);
      const Annotation& truth = scenario.scenario->train[i - 1].annotation;
      engine.apply(simulated_user_step(truth, engine.tracker().status, config.strategy, i));
      RoundOutcome r = engine.end_round(i == n);
      record_round(result.trace, result.metrics, r);
      if (config.stop_accuracy && *r.accuracy >= *config.stop_accuracy) break;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumeric) throw;
    result.trace.complete = false;
  }
  result.metrics.finish();
  result.interactions = engine.interactions();
  result.model = engine.model();
  return result;
}

SessionResult offline_train(const PreparedScenario& scenario, int batch_size, int rounds,
                            const ArchConfig& arch, std::uint64_t seed,
                            const StrategyConfig& config) {
  require(batch_size >= 2 && batch_size % 2 == 0, ErrorKind::kConfig,
          "batch size must be even and at least 2");
  require(rounds >= 0, ErrorKind::kConfig, "rounds must be nonnegative");
  StrategyConfig cfg = config;
  cfg.strategy = Strategy::kOffline;
  cfg.batch_size = batch_size;

  ModelState model = init_model(arch, model_seed(seed));
  std::mt19937_64 rng(sampling_seed(seed));
  const TestSet& test = scenario.test;
  double acc = accuracy(model, *test.images, test.labels);

  std::vector<int> pos, neg;
  for (int i = 0; i < scenario.n(); ++i)
    (scenario.scenario->train[i].annotation.present ? pos : neg).push_back(i);
  std::size_t pos_next = pos.size(), neg_next = neg.size();
  auto take = [&](std::vector<int>& pool, std::size_t& next, MiniBatch& batch, Label label,
                  int k) {
    for (int j = 0; j < k && !pool.empty(); ++j) {
      if (next >= pool.size()) {
        std::shuffle(pool.begin(), pool.end(), rng);
        next = 0;
      }
      batch.push_back({scenario.train[pool[next++]].planar, label, nullptr});
    }
  };

  SessionResult result;
  result.trace = start_trace(cfg, seed, acc);
  result.metrics = StreamingMetrics(acc);
  try {
    for (int i = 1; i <= rounds; ++i) {
      MiniBatch batch;
      take(pos, pos_next, batch, Label::kPositive, batch_size / 2);
      take(neg, neg_next, batch, Label::kNegative, batch_size / 2);
      RoundOutcome r;
      r.frame = i;
      r.u = 1;
      if (!batch.empty()) {
        train_step(model, batch, cfg.optimizer);
        r.trained = 1;
        if (i % cfg.eval_every == 0 || i == rounds) acc = accuracy(model, *test.images, test.labels);
      }
      r.accuracy = acc;
      record_round(result.trace, result.metrics, r);
      if (cfg.stop_accuracy && acc >= *cfg.stop_accuracy) break;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumeric) throw;
    result.trace.complete = false;
  }
  result.metrics.finish();
  result.model = std::move(model);
  return result;
}

std::string interactions_jsonl(const std::vector<InteractionRecord>& records) {
  std::string out;
  for (const InteractionRecord& r : records) {
    nlohmann::ordered_json j;
    j["frame"] = r.frame;
    j["kind"] = to_string(r.kind);
    if (r.click) {
      j["u"] = r.click->x;
      j["v"] = r.click->y;
    }
    j["source"] = to_string(r.source);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace toot
