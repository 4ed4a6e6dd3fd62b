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

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "helpers.hpp"
#include "masking.hpp"
#include "trainer.hpp"

using namespace toot;
using toot::testing::error_kind;
using toot::testing::random_planar;

namespace {

const ArchConfig kArch{};

TrainingExample example(Label label, std::uint64_t seed, bool masked = false) {
  TrainingExample e{random_planar(kArch.input_side, seed), label, nullptr};
  if (masked) {
    auto m = std::make_shared<LayerMask>();
    m->grid = MaskGrid{kArch.grid_side, std::vector<double>(kArch.grid_side * kArch.grid_side, 1.0)};
    e.mask = m;
  }
  return e;
}

HistoryDB history_with(int pos, int neg, bool masked) {
  HistoryDB h;
  for (int i = 0; i < pos; ++i) h.add(example(Label::kPositive, 1000 + i, masked), Source::kUser, i);
  for (int i = 0; i < neg; ++i) h.add(example(Label::kNegative, 2000 + i, masked), Source::kUser, i);
  return h;
}

int count(const MiniBatch& b, Label l) {
  return int(std::count_if(b.begin(), b.end(), [&](const TrainingExample& e) { return e.label == l; }));
}

std::shared_ptr<const Scenario> small_scenario() {
  static const auto sc = [] {
    GenParams p;
    p.train_frames = 80;
    p.test_frames = 40;
    return std::make_shared<const Scenario>(generate_scenario(p, 3));
  }();
  return sc;
}

const PreparedScenario& small_prepared() {
  static const PreparedScenario p = prepare_scenario(small_scenario(), kArch);
  return p;
}

// 160 x 120 frames with a smooth textured sprite over a textured ground.
constexpr int kW = 160, kH = 120, kSprite = 32;

RgbImage sprite_frame(int sx, int sy, bool visible = true) {
  RgbImage img = toot::testing::textured_frame(kW, kH);
  if (!visible) return img;
  for (int y = 0; y < kSprite; ++y)
    for (int x = 0; x < kSprite; ++x) {
      double v = 0.5 + 0.3 * std::sin(0.3 * x + 0.2) * std::cos(0.22 * y) +
                 0.15 * std::sin(0.15 * (x + 2 * y));
      std::uint8_t* p = img.at(sx + x, sy + y);
      p[0] = std::uint8_t(std::lround(255.0 * v));
      p[1] = std::uint8_t(std::lround(160.0 * v));
      p[2] = std::uint8_t(std::lround(60.0 * (1.0 - v)));
    }
  return img;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("semi-online batch fills half and half") {
  std::mt19937_64 rng(1);
  TrainingExample in = example(Label::kPositive, 1);
  SUBCASE("short positive history") {
    HistoryDB h = history_with(3, 5, false);
    MiniBatch b = build_batch_semi_online(h, in, 8, rng);
    CHECK(b.size() == 8);
    CHECK(b[0].image == in.image);
    CHECK(count(b, Label::kPositive) == 4);
    CHECK(count(b, Label::kNegative) == 4);
  }
  SUBCASE("positive history short by more") {
    HistoryDB h = history_with(1, 5, false);
    MiniBatch b = build_batch_semi_online(h, in, 8, rng);
    CHECK(b.size() == 6);
    CHECK(count(b, Label::kPositive) == 2);
    CHECK(count(b, Label::kNegative) == 4);
  }
  SUBCASE("empty history") {
    MiniBatch b = build_batch_semi_online(HistoryDB{}, in, 8, rng);
    REQUIRE(b.size() == 1);
    CHECK(b[0].image == in.image);
  }
  SUBCASE("rich history, no repeats") {
    HistoryDB h = history_with(10, 10, false);
    TrainingExample neg = example(Label::kNegative, 2);
    MiniBatch b = build_batch_semi_online(h, neg, 8, rng);
    CHECK(count(b, Label::kPositive) == 4);
    CHECK(count(b, Label::kNegative) == 4);
    std::vector<const PlanarImage*> seen;
    for (auto& e : b) seen.push_back(e.image.get());
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  }
  SUBCASE("masked history is not used") {
    HistoryDB h = history_with(10, 10, true);
    CHECK(build_batch_semi_online(h, in, 8, rng).size() == 1);
  }
  CHECK(error_kind([&] { build_batch_semi_online(HistoryDB{}, in, 3, rng); }) == ErrorKind::kConfig);
}

TEST_CASE("localized batch: two masked copies then balanced masked history") {
  std::mt19937_64 rng(2);
  auto img = random_planar(kArch.input_side, 5);
  const double r = default_mask_radius(kArch.grid_side);
  SUBCASE("b = 2") {
    HistoryDB h = history_with(5, 5, true);
    MiniBatch b = build_batch_localized(h, img, {3, 4}, 2, kArch.grid_side, r, rng);
    REQUIRE(b.size() == 2);
    CHECK(b[0].image == img);
    CHECK(b[1].image == img);
    CHECK(b[0].label == Label::kPositive);
    CHECK(b[1].label == Label::kNegative);
    REQUIRE(b[0].mask);
    REQUIRE(b[1].mask);
    CHECK(b[0].mask->grid.values != b[1].mask->grid.values);
    MaskPair expect = masks_for_click({3, 4}, r, kArch.grid_side);
    CHECK(b[0].mask->grid.values == expect.positive.grid.values);
    CHECK(b[1].mask->grid.values == expect.negative.grid.values);
  }
  SUBCASE("b = 8 with rich history") {
    HistoryDB h = history_with(6, 6, true);
    MiniBatch b = build_batch_localized(h, img, {0, 0}, 8, kArch.grid_side, r, rng);
    REQUIRE(b.size() == 8);
    CHECK(count(b, Label::kPositive) == 4);
    CHECK(count(b, Label::kNegative) == 4);
    for (auto& e : b) CHECK(e.mask != nullptr);
  }
  SUBCASE("unmasked history is not used") {
    HistoryDB h = history_with(6, 6, false);
    CHECK(build_batch_localized(h, img, {0, 0}, 8, kArch.grid_side, r, rng).size() == 2);
  }
}

TEST_CASE("simulated user") {
  Annotation present{true, Point2{0.3, 0.6}};
  Annotation absent{};
  using enum ActionKind;
  CHECK(simulated_user_step(present, TrackStatus::kIdle, Strategy::kSemiOnline, 1).kind == kTagPositive);
  CHECK(simulated_user_step(absent, TrackStatus::kIdle, Strategy::kSemiOnline, 1).kind == kTagNegative);
  UserAction c = simulated_user_step(present, TrackStatus::kIdle, Strategy::kLocalized, 1);
  CHECK(c.kind == kClick);
  CHECK(c.click == Point2{0.3, 0.6});
  CHECK(simulated_user_step(absent, TrackStatus::kIdle, Strategy::kLocalized, 1).kind == kNone);
  CHECK(simulated_user_step(present, TrackStatus::kActive, Strategy::kOfLocalized, 1).kind == kNone);
  CHECK(simulated_user_step(present, TrackStatus::kFailed, Strategy::kOfLocalized, 1).kind == kClick);
  CHECK(simulated_user_step(present, TrackStatus::kIdle, Strategy::kOfLocalized, 1).click ==
        Point2{0.3, 0.6});
  CHECK(simulated_user_step(absent, TrackStatus::kFailed, Strategy::kOfLocalized, 1).kind == kNone);
  CHECK(simulated_user_step(present, TrackStatus::kIdle, Strategy::kOffline, 1).kind == kNone);
}

TEST_CASE("strategy names and config checks") {
  for (Strategy s : {Strategy::kOffline, Strategy::kSemiOnline, Strategy::kLocalized,
                     Strategy::kOfLocalized})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK(error_kind([] { parse_strategy("online"); }) == ErrorKind::kConfig);
  StrategyConfig c;
  c.batch_size = 5;
  CHECK(error_kind([&] { c.validate(); }) == ErrorKind::kConfig);
  c.batch_size = 8;
  c.runs = 0;
  CHECK(error_kind([&] { c.validate(); }) == ErrorKind::kConfig);
}

TEST_CASE("tracked segment after one click yields one event per tracked frame") {
  SessionSettings s;
  s.batch_size = 2;
  s.optical_flow = true;
  SessionEngine engine(init_model(kArch, 4), s, 9);
  auto frame = [&](int i, bool visible = true) {
    return make_frame_input(sprite_frame(20 + 4 * i, 30 + i, visible), i + 1, kArch, s.tracker);
  };
  engine.begin_round(frame(0));
  engine.click({(20 + 16) / double(kW), (30 + 16) / double(kH)});
  RoundOutcome first = engine.end_round();
  CHECK(first.u == 1);
  CHECK(first.trained == 1);
  CHECK(engine.tracker().status == TrackStatus::kActive);

  int events = 0, users = 1;
  for (int i = 1; i <= 10; ++i) {
    engine.begin_round(frame(i));
    RoundOutcome r = engine.end_round();
    events += r.of_events;
    users += r.u;
    CHECK(r.trained == r.of_events);
  }
  CHECK(events == 10);
  CHECK(users == 1);
  CHECK(engine.model().version == 11);

  // OF events follow the sprite within one grid cell.
  for (const InteractionRecord& rec : engine.interactions()) {
    REQUIRE(rec.click);
    int i = rec.frame - 1;
    double tu = (20 + 4 * i + 16) / double(kW), tv = (30 + i + 16) / double(kH);
    GridCell got = click_to_cell(rec.click->x, rec.click->y, kArch.grid_side);
    GridCell want = click_to_cell(tu, tv, kArch.grid_side);
    CHECK(std::abs(got.x - want.x) <= 1);
    CHECK(std::abs(got.y - want.y) <= 1);
    CHECK(rec.source == (rec.frame == 1 ? Source::kUser : Source::kOpticalFlow));
  }

  // Sprite gone: no events once the tracker has failed.
  int after = 0;
  for (int i = 11; i <= 15; ++i) {
    engine.begin_round(frame(i, false));
    after += engine.end_round().of_events;
  }
  CHECK(engine.tracker().status == TrackStatus::kFailed);
  CHECK(after <= 2);
  engine.begin_round(frame(16, false));
  CHECK(engine.end_round().of_events == 0);
}

TEST_CASE("engine enforces round structure") {
  SessionEngine engine(init_model(kArch, 1), SessionSettings{}, 1);
  CHECK(error_kind([&] { engine.tag(Label::kPositive); }) == ErrorKind::kUsage);
  CHECK(error_kind([&] { engine.end_round(); }) == ErrorKind::kUsage);
  const FrameInput& f = small_prepared().train[0];
  engine.begin_round(f);
  CHECK(error_kind([&] { engine.begin_round(f); }) == ErrorKind::kUsage);
  CHECK(error_kind([&] { engine.click({1.0, 0.5}); }) == ErrorKind::kUsage);
  RoundOutcome r = engine.end_round();
  CHECK_FALSE(r.accuracy);
}

TEST_CASE("no interactions keep the untrained accuracy") {
  const PreparedScenario& p = small_prepared();
  SessionEngine engine(init_model(kArch, 12), SessionSettings{}, 5, p.test);
  const double a0 = *engine.accuracy();
  for (const FrameInput& f : p.train) {
    engine.begin_round(f);
    RoundOutcome r = engine.end_round(true);
    CHECK(r.u == 0);
    CHECK_FALSE(r.evaluated);
    CHECK(*r.accuracy == a0);
  }
  CHECK(engine.model().version == 0);
}

TEST_CASE("sessions replay identically for the same seed") {
  const PreparedScenario& p = small_prepared();
  for (Strategy s : {Strategy::kSemiOnline, Strategy::kOfLocalized}) {
    StrategyConfig c;
    c.strategy = s;
    c.batch_size = 4;
    SessionResult a = run_session(p, c, kArch, 77);
    SessionResult b = run_session(p, c, kArch, 77);
    CHECK(a.trace == b.trace);
    CHECK(a.interactions == b.interactions);
    CHECK(a.model.params == b.model.params);
    CHECK(trace_csv(std::vector<MetricsTrace>{a.trace}) ==
          trace_csv(std::vector<MetricsTrace>{b.trace}));
    SessionResult other = run_session(p, c, kArch, 78);
    CHECK_FALSE(other.model.params == a.model.params);
  }
}

TEST_CASE("session traces are consistent") {
  const PreparedScenario& p = small_prepared();
  for (Strategy s : {Strategy::kSemiOnline, Strategy::kLocalized, Strategy::kOfLocalized}) {
    StrategyConfig c;
    c.strategy = s;
    c.batch_size = 2;
    SessionResult r = run_session(p, c, kArch, 5);
    const MetricsTrace& t = r.trace;
    REQUIRE(t.n() == p.n());
    t.validate();
    CHECK(t.complete);
    CHECK(t.strategy == to_string(s));
    // One gradient update per training event.
    int events = std::accumulate(t.trained.begin(), t.trained.end(), 0);
    CHECK(r.model.version == events);
    int users = std::accumulate(t.u.begin(), t.u.end(), 0);
    int of = std::accumulate(t.of_events.begin(), t.of_events.end(), 0);
    CHECK(events == users + of);
    CHECK(int(r.interactions.size()) == events);
    // Accuracy only moves after a training event.
    for (int i = 1; i <= t.n(); ++i)
      if (t.trained[i - 1] == 0) CHECK(t.A[i] == t.A[i - 1]);
    // Streaming equals post-hoc.
    for (int i = 1, m = 0; i <= t.n(); ++i) {
      if (t.u_at(i) != 1) continue;
      CHECK(r.metrics.itb()[m++] == itb_interaction(t, i));
    }
    if (users > 0) CHECK(r.metrics.mean_itb() == mean_itb(t, 1, t.n()));
    if (s == Strategy::kSemiOnline) CHECK(users == t.n());
    if (s == Strategy::kOfLocalized) CHECK(events >= users);
    if (s != Strategy::kOfLocalized) CHECK(of == 0);
    // Users act on ground truth.
    for (int i = 1; i <= t.n(); ++i) {
      bool present = p.scenario->train[i - 1].annotation.present;
      if (s == Strategy::kLocalized) CHECK(t.u_at(i) == int(present));
      if (s == Strategy::kOfLocalized && !present) CHECK(t.u_at(i) == 0);
    }
  }
}

TEST_CASE("interaction audit log") {
  std::vector<InteractionRecord> recs = {{3, ActionKind::kTagNegative, std::nullopt, Source::kUser},
                                         {4, ActionKind::kClick, Point2{0.25, 0.5}, Source::kOpticalFlow}};
  std::string log = interactions_jsonl(recs);
  CHECK(log ==
        "{\"frame\":3,\"kind\":\"tag_negative\",\"source\":\"user\"}\n"
        "{\"frame\":4,\"kind\":\"click\",\"u\":0.25,\"v\":0.5,\"source\":\"optical_flow\"}\n");
}

TEST_CASE("stop condition ends the run early") {
  const PreparedScenario& p = small_prepared();
  StrategyConfig c;
  c.strategy = Strategy::kSemiOnline;
  c.stop_accuracy = 0.0;
  SessionResult r = run_session(p, c, kArch, 5);
  CHECK(r.trace.n() == 1);
}

TEST_CASE("offline reference") {
  const PreparedScenario& p = small_prepared();
  SessionResult zero = offline_train(p, 8, 0, kArch, 3);
  CHECK(zero.trace.n() == 0);
  CHECK(std::abs(zero.trace.A[0] - 0.5) <= 0.15);
  SessionResult a = offline_train(p, 8, 30, kArch, 3);
  SessionResult b = offline_train(p, 8, 30, kArch, 3);
  CHECK(a.trace == b.trace);
  CHECK(a.model.version == 30);
  for (int u : a.trace.u) CHECK(u == 1);
  StrategyConfig c;
  c.strategy = Strategy::kOffline;
  SessionResult via = run_session(p, c, kArch, 3);
  CHECK(via.trace.n() == p.n());
  CHECK(via.trace.strategy == "offline");
}

TEST_CASE("trained CAM points at the target") {
  GenParams gp;
  auto sc = std::make_shared<const Scenario>(generate_scenario(gp, 1));
  PreparedScenario p = prepare_scenario(sc, kArch);
  SessionResult r = offline_train(p, 8, 400, kArch, run_seed(1, 0),
                                  [] { StrategyConfig c; c.eval_every = 1000; return c; }());
  const int S = kArch.grid_side;
  int positives = 0, hits = 0;
  for (std::size_t i = 0; i < sc->test.size(); ++i) {
    const Annotation& a = sc->test[i].annotation;
    if (!a.present) continue;
    ++positives;
    std::vector<double> cam = cam_map(r.model, *p.test.images->images()[i], 1);
    int best = int(std::max_element(cam.begin(), cam.end()) - cam.begin());
    GridCell want = click_to_cell(a.center->x, a.center->y, S);
    if (std::hypot(best % S - want.x, best / S - want.y) <= 3.0) ++hits;
  }
  MESSAGE("CAM hits " << hits << "/" << positives << ", accuracy " << r.trace.A.back());
  CHECK(hits >= 0.7 * positives);
}

}  // TEST_SUITE
