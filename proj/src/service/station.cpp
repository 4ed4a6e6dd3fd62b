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


#include "station.hpp"

#include <algorithm>
#include <fstream>

#include "error.hpp"

namespace toot::station {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

proto::ErrorMessage error_reply(std::string code, std::string message,
                                std::optional<std::int64_t> seq = std::nullopt) {
  return proto::ErrorMessage{std::move(code), std::move(message), seq};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
}

}  // namespace

ScenarioSource::ScenarioSource(std::shared_ptr<const PreparedScenario> scenario)
    : scenario_(std::move(scenario)) {
  require(scenario_ && scenario_->scenario, ErrorKind::kUsage, "scenario source without scenario");
}

std::optional<SourceFrame> ScenarioSource::next() {
  if (pos_ >= scenario_->n()) return std::nullopt;
  const Frame& f = scenario_->scenario->train[pos_];
  // Aliasing constructor: the image lives as long as the scenario does.
  std::shared_ptr<const RgbImage> image(scenario_->scenario, &f.image);
  SourceFrame out{f.index, std::move(image), scenario_->train[pos_]};
  ++pos_;
  return out;
}

DirectorySource::DirectorySource(const std::filesystem::path& dir, const ArchConfig& arch,
                                 const TrackerConfig& tracker)
    : arch_(arch), tracker_(tracker) {
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      files_.push_back(entry.path());
  if (ec) fail(ErrorKind::kIo, "cannot list " + dir.string() + ": " + ec.message());
  if (files_.empty()) fail(ErrorKind::kIo, "no PNG frames in " + dir.string());
  std::sort(files_.begin(), files_.end());
}

std::optional<SourceFrame> DirectorySource::next() {
  if (pos_ >= files_.size()) return std::nullopt;
  auto image = std::make_shared<const RgbImage>(read_png(files_[pos_]));
  ++pos_;
  int index = int(pos_);
  return SourceFrame{index, image, make_frame_input(*image, index, arch_, tracker_)};
}

const char* to_string(Pacing p) { return p == Pacing::kLockstep ? "lockstep" : "paced"; }

void StationConfig::validate() const {
  strategy.validate();
  require(strategy.strategy != Strategy::kOffline, ErrorKind::kConfig,
          "the station serves online strategies only");
  require(fps > 0.0 && fps <= 1000.0, ErrorKind::kConfig, "fps must be in (0, 1000]");
  require(window >= 1, ErrorKind::kConfig, "window must hold at least one frame");
  require(display_size >= 1 && display_size <= 4096, ErrorKind::kConfig,
          "display size must be in [1, 4096]");
}

Station::Station(std::shared_ptr<FrameSource> source, const ArchConfig& arch,
                 StationConfig config, std::optional<TestSet> test)
    : source_(std::move(source)), arch_(arch), config_(std::move(config)), test_(std::move(test)) {
  require(bool(source_), ErrorKind::kUsage, "station without frame source");
  config_.validate();
  restart();
}

void Station::restart() {
  engine_.emplace(init_model(arch_, model_seed(config_.seed)), session_settings(config_.strategy),
                  sampling_seed(config_.seed), test_);
  double a0 = engine_->accuracy().value_or(0.0);
  trace_ = start_trace(config_.strategy, config_.seed, a0);
  metrics_ = StreamingMetrics(a0);
  source_->rewind();
  window_.clear();
  rounds_ = 0;
  dropped_ = 0;
  started_ = running_ = ended_ = false;
}

proto::HelloMessage Station::hello() const {
  proto::HelloMessage h;
  h.mode = to_string(config_.pacing);
  h.fps = config_.fps;
  h.window = config_.window;
  h.frames = source_->length();
  h.grid_side = arch_.grid_side;
  h.strategy = config_.strategy.label();
  return h;
}

const Station::Held* Station::find(std::int64_t seq) const {
  for (const Held& h : window_)
    if (h.seq == seq) return &h;
  return nullptr;
}

proto::FrameMessage Station::frame_message(const Held& held) const {
  const SessionEngine& e = *engine_;
  const SourceFrame& f = held.frame;
  proto::FrameMessage m;
  m.seq = held.seq;
  m.frame_index = f.index;
  RgbImage display = resize_nearest(*f.image, config_.display_size, config_.display_size);
  m.image = proto::base64_encode(encode_png(display));
  m.cam = proto::normalize_cam(e.cam(index_of(Label::kPositive)), arch_.grid_side);
  Prediction p = e.recognize();
  m.scores = {p.positive, p.negative};
  m.model_version = e.model().version;
  const TrackerState& t = e.tracker();
  m.tracker.status = t.status;
  if (t.status == TrackStatus::kActive) {
    const double W = f.input.width, H = f.input.height;
    m.tracker.bbox = proto::NormBox{(t.bbox.cx - t.bbox.width / 2) / W,
                                    (t.bbox.cy - t.bbox.height / 2) / H, t.bbox.width / W,
                                    t.bbox.height / H};
  }
  m.accuracy = e.accuracy();
  return m;
}

std::vector<proto::DownMessage> Station::advance(int skip) {
  require(skip >= 0, ErrorKind::kUsage, "negative frame skip");
  if (ended_) return {};
  started_ = true;
  std::vector<SourceFrame> pulled;
  while (int(pulled.size()) <= skip) {
    std::optional<SourceFrame> f = source_->next();
    if (!f) break;
    pulled.push_back(std::move(*f));
  }
  const bool more = int(pulled.size()) == skip + 1;

  SessionEngine& e = *engine_;
  if (e.in_round()) {
    RoundOutcome r = e.end_round(!more);
    ++rounds_;
    if (r.accuracy) record_round(trace_, metrics_, r);
  }
  // Frames that fell due while the station was busy are skipped unseen.
  for (std::size_t i = 0; i + 1 < pulled.size() || (!more && i < pulled.size()); ++i) {
    RoundOutcome idle;
    idle.frame = pulled[i].index;
    idle.accuracy = e.accuracy();
    ++rounds_;
    ++dropped_;
    if (idle.accuracy) record_round(trace_, metrics_, idle);
  }

  if (!more) {
    ended_ = true;
    running_ = false;
    metrics_.finish();
    if (config_.audit_dir) write_audit(*config_.audit_dir);
    int interactions = 0;
    for (const InteractionRecord& rec : e.interactions())
      if (rec.source == Source::kUser) ++interactions;
    return {proto::EndMessage{rounds_, interactions, e.model().version, e.accuracy()}};
  }

  e.begin_round(pulled.back().input);
  window_.push_back(Held{next_seq_++, std::move(pulled.back())});
  while (int(window_.size()) > config_.window) window_.pop_front();
  return {frame_message(window_.back())};
}

std::vector<proto::DownMessage> Station::interact(const proto::UpMessage& msg) {
  std::int64_t seq = std::visit(
      overloaded{[](const proto::TagMessage& m) { return m.seq; },
                 [](const proto::ClickMessage& m) { return m.seq; },
                 [](const proto::ControlMessage&) { return std::int64_t(-1); }},
      msg);
  const Held* held = find(seq);
  if (!held) return {error_reply("stale_seq", "frame is not in the window", seq)};
  if (ended_ || !engine_->in_round())
    return {error_reply("no_round", "no training round is open", seq)};
  try {
    if (const auto* tag = std::get_if<proto::TagMessage>(&msg))
      engine_->tag(held->frame.input, tag->label == proto::TagLabel::kPositive
                                          ? Label::kPositive
                                          : Label::kNegative);
    else {
      const auto& click = std::get<proto::ClickMessage>(msg);
      engine_->click(held->frame.input, {click.u, click.v});
    }
  } catch (const Error& err) {
    return {error_reply(to_string(err.kind()), err.what(), seq)};
  }
  return {};
}

std::vector<proto::DownMessage> Station::handle(const proto::UpMessage& msg) {
  const auto* control = std::get_if<proto::ControlMessage>(&msg);
  if (!control) return interact(msg);
  switch (control->action) {
    case proto::ControlAction::kStart:
      if (ended_) return {error_reply("ended", "stream is over; reset to replay")};
      running_ = true;
      if (!started_) return advance();
      return {};
    case proto::ControlAction::kPause:
      running_ = false;
      return {};
    case proto::ControlAction::kStep:
      if (ended_) return {error_reply("ended", "stream is over; reset to replay")};
      return advance();
    case proto::ControlAction::kReset:
      restart();
      return {hello()};
  }
  return {};
}

void Station::write_audit(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "interactions.jsonl", interactions_jsonl(engine_->interactions()));
  if (test_) {
    std::vector<MetricsTrace> one{trace_};
    write_text(dir / ("trace_" + config_.strategy.label() + ".csv"), trace_csv(one));
  }
}

}  // namespace toot::station
