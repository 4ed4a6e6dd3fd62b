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
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <doctest.h>

#include "helpers.hpp"
#include "scenario.hpp"

using namespace toot;
using toot::testing::error_kind;
using toot::testing::scratch_dir;

namespace fs = std::filesystem;

namespace {

const Scenario& default_scenario() {
  static const Scenario sc = generate_scenario(GenParams{}, 1);
  return sc;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Nearest of the first four ground-cover base colours, by per-channel median.
int ground_class(const RgbImage& img) {
  static constexpr std::array<std::array<double, 3>, 4> kBase = {
      {{72, 118, 52}, {92, 94, 99}, {132, 112, 82}, {58, 86, 116}}};
  std::array<double, 3> med{};
  for (int c = 0; c < 3; ++c) {
    std::vector<int> v;
    for (std::size_t i = c; i < img.pixels.size(); i += 3) v.push_back(img.pixels[i]);
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    med[c] = v[v.size() / 2];
  }
  int best = 0;
  double best_d = 1e300;
  for (int k = 0; k < 4; ++k) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) d += (med[c] - kBase[k][c]) * (med[c] - kBase[k][c]);
    if (d < best_d) best_d = d, best = k;
  }
  return best;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("default parameters give 400 train and 200 balanced test frames") {
  const Scenario& sc = default_scenario();
  CHECK(sc.train.size() == 400);
  CHECK(sc.test.size() == 200);
  CHECK(sc.frame_width() == 56);
  CHECK(sc.frame_height() == 56);
  int pos = 0;
  for (const Frame& f : sc.test) pos += f.annotation.present;
  CHECK(pos == 100);
  int train_pos = 0;
  for (const Frame& f : sc.train) train_pos += f.annotation.present;
  CHECK(train_pos > 100);
  CHECK(train_pos < 300);
  CHECK(sc.seed == 1u);
  REQUIRE(sc.params);
  CHECK(*sc.params == GenParams{});
}

TEST_CASE("same seed gives byte-identical frames, another seed does not") {
  GenParams p;
  p.train_frames = 120;
  p.test_frames = 40;
  Scenario a = generate_scenario(p, 5), b = generate_scenario(p, 5), c = generate_scenario(p, 6);
  CHECK(a == b);
  CHECK_FALSE(a.train[10].image == c.train[10].image);
}

TEST_CASE("per-frame target displacement stays within the bound") {
  const Scenario& sc = default_scenario();
  const double bound = GenParams{}.max_speed;
  double worst = 0.0;
  for (std::size_t i = 1; i < sc.train.size(); ++i) {
    const Annotation& a = sc.train[i - 1].annotation;
    const Annotation& b = sc.train[i].annotation;
    if (!a.center || !b.center) continue;
    double d = 56.0 * std::hypot(b.center->x - a.center->x, b.center->y - a.center->y);
    worst = std::max(worst, d);
  }
  CHECK(worst > 0.5);
  CHECK(worst <= bound + 1e-9);
}

TEST_CASE("presence comes in contiguous segments") {
  const Scenario& sc = default_scenario();
  int switches = 0, run = 1, shortest = 1 << 30;
  for (std::size_t i = 1; i < sc.train.size(); ++i) {
    if (sc.train[i].annotation.present != sc.train[i - 1].annotation.present) {
      ++switches;
      shortest = std::min(shortest, run);
      run = 1;
    } else {
      ++run;
    }
  }
  CHECK(switches >= 4);
  CHECK(shortest >= 5);
}

TEST_CASE("each background is seen with and without the target") {
  const Scenario& sc = default_scenario();
  std::set<std::pair<int, bool>> seen;
  std::set<int> classes;
  for (const Frame& f : sc.train) {
    int k = ground_class(f.image);
    classes.insert(k);
    seen.insert({k, f.annotation.present});
  }
  CHECK(classes.size() >= 3);
  for (int k : classes) {
    CHECK(seen.count({k, true}) == 1);
    CHECK(seen.count({k, false}) == 1);
  }
}

TEST_CASE("test negatives contain no target colour") {
  const Scenario& sc = default_scenario();
  // The target body is saturated red, which no ground cover produces.
  for (const Frame& f : sc.test) {
    if (f.annotation.present) continue;
    int red = 0;
    for (std::size_t i = 0; i < f.image.pixels.size(); i += 3) {
      int r = f.image.pixels[i], g = f.image.pixels[i + 1], b = f.image.pixels[i + 2];
      red += r > 150 && r > 2 * g && r > 2 * b;
    }
    CHECK(red == 0);
  }
}

TEST_CASE("save and load round-trip") {
  GenParams p;
  p.train_frames = 60;
  p.test_frames = 20;
  p.distractor = true;
  Scenario sc = generate_scenario(p, 9);
  auto dir = scratch_dir("scenario_rt");
  save_scenario(sc, dir);
  CHECK(fs::exists(dir / "train" / "000001.png"));
  CHECK(fs::exists(dir / "test" / "000020.png"));
  Scenario back = load_scenario(dir);
  CHECK(back == sc);
}

TEST_CASE("hand-written fixture loads with expected fields") {
  Scenario sc = load_scenario(fs::path(TOOT_FIXTURE_DIR) / "tiny_scenario");
  CHECK(sc.name == "tiny");
  CHECK_FALSE(sc.seed);
  CHECK_FALSE(sc.params);
  REQUIRE(sc.train.size() == 2);
  REQUIRE(sc.test.size() == 2);
  CHECK(sc.frame_width() == 16);
  CHECK(sc.frame_height() == 12);
  CHECK(sc.train[0].annotation.present);
  CHECK(sc.train[0].annotation.center == Point2{0.25, 0.5});
  CHECK(sc.train[0].label() == Label::kPositive);
  CHECK_FALSE(sc.train[1].annotation.present);
  CHECK_FALSE(sc.train[1].annotation.center);
  CHECK(sc.test[0].annotation.center == Point2{0.75, 0.25});
  CHECK(sc.test[1].label() == Label::kNegative);
  const std::uint8_t* target = sc.train[0].image.at(4, 6);
  CHECK(target[0] == 220);
  CHECK(target[1] == 30);
  const std::uint8_t* ground = sc.train[1].image.at(4, 6);
  CHECK(ground[1] == 90);
}

TEST_CASE("present target without a center is rejected") {
  auto dir = scratch_dir("scenario_nocenter");
  fs::copy(fs::path(TOOT_FIXTURE_DIR) / "tiny_scenario", dir, fs::copy_options::recursive);
  std::string ann = slurp(dir / "annotations.jsonl");
  const std::string full = "\"present\":true,\"cx\":0.25,\"cy\":0.5";
  ann.replace(ann.find(full), full.size(), "\"present\":true");
  spit(dir / "annotations.jsonl", ann);
  CHECK(error_kind([&] { load_scenario(dir); }) == ErrorKind::kValidation);

  Scenario sc = default_scenario();
  sc.train[0].annotation = Annotation{true, std::nullopt};
  CHECK(error_kind([&] { sc.validate(); }) == ErrorKind::kValidation);
}

TEST_CASE("parse errors name the offending line") {
  auto dir = scratch_dir("scenario_parse");
  fs::copy(fs::path(TOOT_FIXTURE_DIR) / "tiny_scenario", dir, fs::copy_options::recursive);
  std::string ann = slurp(dir / "annotations.jsonl");
  std::size_t third = ann.find("{\"split\":\"test\"");
  ann.insert(third + 1, "oops ");
  spit(dir / "annotations.jsonl", ann);
  try {
    load_scenario(dir);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("unbalanced test set is a validation error") {
  Scenario sc = load_scenario(fs::path(TOOT_FIXTURE_DIR) / "tiny_scenario");
  sc.test[1].annotation = sc.test[0].annotation;
  CHECK(error_kind([&] { sc.validate(); }) == ErrorKind::kValidation);

  Scenario gap = load_scenario(fs::path(TOOT_FIXTURE_DIR) / "tiny_scenario");
  gap.train[1].index = 3;
  CHECK(error_kind([&] { gap.validate(); }) == ErrorKind::kValidation);
}

TEST_CASE("invalid generator parameters are config errors") {
  GenParams p;
  p.sprite_max = 30;
  CHECK(error_kind([&] { generate_scenario(p, 1); }) == ErrorKind::kConfig);
  GenParams q;
  q.test_frames = 7;
  CHECK(error_kind([&] { generate_scenario(q, 1); }) == ErrorKind::kConfig);
  GenParams r;
  r.cruise_speed = 8.0;
  CHECK(error_kind([&] { generate_scenario(r, 1); }) == ErrorKind::kConfig);
}

TEST_CASE("missing directory is an IO error") {
  CHECK(error_kind([&] { load_scenario("/nonexistent/toot_scenario"); }) == ErrorKind::kIo);
}

}  // TEST_SUITE
