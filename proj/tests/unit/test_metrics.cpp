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

#include <cmath>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "helpers.hpp"
#include "metric_oracle.hpp"
#include "metrics.hpp"

using namespace toot;
using toot::testing::error_kind;

namespace {

MetricsTrace make_trace(std::vector<int> u, std::vector<double> A, std::string strategy = "s",
                        int run = 0) {
  MetricsTrace t;
  t.strategy = std::move(strategy);
  t.batch_size = 2;
  t.run = run;
  t.of_events.assign(u.size(), 0);
  t.trained = u;
  t.u = std::move(u);
  t.A = std::move(A);
  return t;
}

MetricsTrace from_oracle(const oracle::Trace& o) {
  std::vector<int> u(o.u.begin() + 1, o.u.end());
  return make_trace(u, o.A);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("frame CTB") {
  MetricsTrace t = make_trace({1, 1}, {0.5, 0.6, 0.8});
  CHECK(ctb_frame(t, 2) == doctest::Approx(0.3).epsilon(1e-15));
  MetricsTrace flat = make_trace({0, 0}, {0.5, 0.5, 0.5});
  CHECK(ctb_frame(flat, 1) == 0.0);
  CHECK(error_kind([&] { ctb_frame(t, 0); }) == ErrorKind::kUndefined);
  CHECK(error_kind([&] { ctb_frame(t, 3); }) == ErrorKind::kUndefined);
}

TEST_CASE("interaction ITB and CTB on the worked trace") {
  MetricsTrace t = make_trace({1, 0, 1}, {0.5, 0.6, 0.6, 0.8});
  CHECK(itb_interaction(t, 1) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(itb_interaction(t, 3) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(ctb_interaction(t, 1) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(ctb_interaction(t, 3) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(error_kind([&] { itb_interaction(t, 2); }) == ErrorKind::kUndefined);
  CHECK(error_kind([&] { ctb_interaction(t, 2); }) == ErrorKind::kUndefined);
  MetricsTrace still = make_trace({1, 0, 1}, {0.5, 0.5, 0.5, 0.5});
  CHECK(itb_interaction(still, 1) == 0.0);
}

TEST_CASE("mean ITB") {
  MetricsTrace t = make_trace({1, 0, 1}, {0.5, 0.6, 0.6, 0.8});
  CHECK(mean_itb(t, 1, 3) == doctest::Approx(0.15).epsilon(1e-14));
  CHECK(mean_itb(t, 3, 3) == itb_interaction(t, 3));
  CHECK(interaction_count(t, 1, 3) == 2);
  CHECK(error_kind([&] { mean_itb(t, 2, 2); }) == ErrorKind::kUndefined);
}

TEST_CASE("A_max and f") {
  MetricsTrace t = make_trace({1, 1}, {0.5, 0.9, 0.7});
  CHECK(a_max(t) == 0.9);
  CHECK(find_f(t, 0.8) == 1);
  CHECK(find_f(t, 0.9) == 1);  // inclusive
  CHECK_FALSE(find_f(t, 0.95));
  MetricsTrace mono = make_trace({1, 1, 1}, {0.5, 0.6, 0.7, 0.8});
  CHECK(a_max(mono) == 0.8);
  // A_0 never counts toward A_max.
  MetricsTrace drop = make_trace({1}, {0.9, 0.6});
  CHECK(a_max(drop) == 0.6);
}

TEST_CASE("truncation treats the cut as the end of the run") {
  MetricsTrace t = make_trace({1, 0, 1, 1}, {0.5, 0.6, 0.7, 0.9, 0.8});
  MetricsTrace c = truncate(t, 3);
  CHECK(c.n() == 3);
  CHECK(c.A.size() == 4);
  CHECK(itb_interaction(c, 3) == doctest::Approx(0.9 - 0.7).epsilon(1e-14));
  CHECK(error_kind([&] { truncate(t, 5); }) == ErrorKind::kUsage);
}

TEST_CASE("randomized traces agree with the brute-force oracle") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    oracle::Trace o = oracle::random_trace(seed);
    MetricsTrace t = from_oracle(o);
    StreamingMetrics s(o.A[0]);
    for (int i = 1; i <= o.n(); ++i) s.push(o.u[i], o.A[i]);
    s.finish();
    for (int i = 1; i <= o.n(); ++i) {
      REQUIRE(ctb_frame(t, i) == oracle::ctb(o, i));
      REQUIRE(s.ctb_frame(i) == oracle::ctb(o, i));
    }
    std::size_t m = 0;
    for (int i = 1; i <= o.n(); ++i) {
      if (o.u[i] != 1) continue;
      REQUIRE(itb_interaction(t, i) == oracle::itb_u(o, i));
      REQUIRE(ctb_interaction(t, i) == oracle::ctb_u(o, i));
      REQUIRE(s.interaction_frames()[m] == i);
      REQUIRE(s.itb()[m] == oracle::itb_u(o, i));
      ++m;
    }
    REQUIRE(s.interactions() == int(m));
    if (m > 0) {
      double expected = oracle::mean_itb(o, 1, o.n());
      CHECK(mean_itb(t, 1, o.n()) == expected);
      CHECK(s.mean_itb() == expected);
      CHECK(s.mean_itb() == mean_itb(t, 1, o.n()));
      // Telescoping.
      int i0 = oracle::first_interaction(o);
      CHECK(std::abs(s.itb_sum() - (o.A[o.n()] - o.A[i0 - 1])) <= 1e-12);
    }
  }
}

TEST_CASE("streaming ITB is provisional until the next interaction") {
  StreamingMetrics s(0.5);
  s.push(1, 0.6);
  REQUIRE(s.itb().size() == 1);
  CHECK(s.itb()[0] == doctest::Approx(0.1));
  s.push(0, 0.7);
  CHECK(s.itb()[0] == doctest::Approx(0.2));
  s.push(1, 0.9);
  CHECK(s.itb()[0] == doctest::Approx(0.2));
  CHECK(s.itb()[1] == doctest::Approx(0.2));
  s.finish();
  CHECK(error_kind([&] { s.push(0, 0.9); }) == ErrorKind::kUsage);
  StreamingMetrics none(0.5);
  none.push(0, 0.5);
  CHECK(error_kind([&] { none.mean_itb(); }) == ErrorKind::kUndefined);
}

TEST_CASE("aggregation") {
  MetricsTrace a = make_trace({1, 0, 1}, {0.5, 0.6, 0.8, 0.8}, "s", 0);
  SUBCASE("identical runs aggregate to any one of them") {
    std::vector<MetricsTrace> runs(10, a);
    StrategySummary s = aggregate_runs(runs, 0.8);
    CHECK(s.mean_A == a.A);
    CHECK(s.f == 2);
    CHECK(s.a_max == 0.8);
    CHECK(s.runs == 10);
    CHECK(s.runs_reached == 10);
    CHECK(s.interactions_to_f == 1.0);
    REQUIRE(s.mean_itb);
    CHECK(*s.mean_itb == doctest::Approx(0.3));
  }
  SUBCASE("element-wise mean") {
    MetricsTrace b = make_trace({1, 1, 1}, {0.5, 0.8, 0.6, 0.6}, "s", 1);
    std::vector<MetricsTrace> runs = {a, b};
    StrategySummary s = aggregate_runs(runs, 0.8);
    CHECK(s.mean_A[1] == doctest::Approx(0.7));
    CHECK(s.per_run[0].f == 2);
    CHECK(s.per_run[1].f == 1);
    CHECK(s.interactions_to_f == doctest::Approx(1.0));
    CHECK(s.a_max == doctest::Approx(0.8));
  }
  SUBCASE("a run that never reaches A_f counts all its interactions") {
    MetricsTrace low = make_trace({1, 1, 1}, {0.5, 0.55, 0.6, 0.6}, "s", 1);
    std::vector<MetricsTrace> runs = {a, low};
    StrategySummary s = aggregate_runs(runs, 0.8);
    CHECK(s.runs_reached == 1);
    CHECK_FALSE(s.per_run[1].f);
    CHECK(s.per_run[1].interactions_to_f == 3);
    CHECK(s.interactions_to_f == doctest::Approx(2.0));
  }
  SUBCASE("heterogeneous traces are rejected") {
    MetricsTrace other = a;
    other.strategy = "t";
    std::vector<MetricsTrace> runs = {a, other};
    CHECK(error_kind([&] { aggregate_runs(runs, 0.8); }) == ErrorKind::kValidation);
    MetricsTrace shorter = make_trace({1}, {0.5, 0.6}, "s");
    std::vector<MetricsTrace> runs2 = {a, shorter};
    CHECK(error_kind([&] { aggregate_runs(runs2, 0.8); }) == ErrorKind::kValidation);
  }
}

TEST_CASE("trace validation") {
  MetricsTrace t = make_trace({1, 2}, {0.5, 0.6, 0.7});
  CHECK(error_kind([&] { t.validate(); }) == ErrorKind::kValidation);
  MetricsTrace bad_a = make_trace({1}, {0.5, 1.5});
  CHECK(error_kind([&] { bad_a.validate(); }) == ErrorKind::kValidation);
  MetricsTrace short_a = make_trace({1, 0}, {0.5, 0.6});
  CHECK(error_kind([&] { short_a.validate(); }) == ErrorKind::kValidation);
}

TEST_CASE("accuracy from predictions") {
  std::vector<Label> labels = {Label::kPositive, Label::kNegative, Label::kPositive,
                               Label::kNegative};
  std::vector<Prediction> constant(4);
  CHECK(accuracy(constant, labels) == 0.5);
  std::vector<Prediction> perfect(4);
  for (std::size_t i = 0; i < 4; ++i) perfect[i].label = labels[i];
  CHECK(accuracy(perfect, labels) == 1.0);
  CHECK(error_kind([&] { accuracy(std::vector<Prediction>{}, std::vector<Label>{}); }) ==
        ErrorKind::kValidation);
}

TEST_CASE("model accuracy matches a per-image recount") {
  ArchConfig arch;
  ModelState m = init_model(arch, 33);
  std::vector<std::shared_ptr<const PlanarImage>> imgs;
  std::vector<Label> labels;
  for (int i = 0; i < 40; ++i) {
    imgs.push_back(toot::testing::random_planar(arch.input_side, 100 + i));
    labels.push_back(i % 2 ? Label::kPositive : Label::kNegative);
  }
  EvalSet set(arch, imgs);
  int correct = 0;
  for (std::size_t i = 0; i < imgs.size(); ++i) correct += predict(m, *imgs[i]).label == labels[i];
  CHECK(accuracy(m, set, labels) == double(correct) / 40.0);
  std::vector<Label> skewed = labels;
  skewed[0] = Label::kPositive;
  CHECK(error_kind([&] { accuracy(m, set, skewed); }) == ErrorKind::kValidation);
}

TEST_CASE("trace CSV round-trips and has the expected layout") {
  MetricsTrace a = make_trace({1, 0, 1}, {0.5, 0.6, 0.6, 0.8}, "semi_online", 0);
  a.of_events = {0, 2, 0};
  MetricsTrace b = make_trace({0, 1, 1}, {0.5, 0.5, 0.705, 0.1}, "semi_online", 1);
  std::vector<MetricsTrace> traces = {a, b};
  std::string csv = trace_csv(traces);
  CHECK(csv.rfind("run,frame,u,of_events,trained,A,CTB\n0,0,0,0,0,0.5,\n0,1,1,0,1,0.6,", 0) == 0);
  CHECK(csv.find("\r") == std::string::npos);
  CHECK(csv.find("\n0,2,0,2,0,0.6,") != std::string::npos);
  std::vector<MetricsTrace> back = parse_trace_csv(csv);
  REQUIRE(back.size() == 2);
  CHECK(back[0].u == a.u);
  CHECK(back[0].A == a.A);
  CHECK(back[0].of_events == a.of_events);
  CHECK(back[1].A == b.A);
  CHECK(error_kind([&] { parse_trace_csv("run,frame\n"); }) == ErrorKind::kParse);
}

TEST_CASE("numbers print in shortest round-trip form") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(0.1 + 0.2) == "0.30000000000000004");
  CHECK(format_number(1.0) == "1");
  double x = 0.8725;
  CHECK(std::stod(format_number(x)) == x);
}

TEST_CASE("summary JSON and comparison CSV") {
  MetricsTrace a = make_trace({1, 0, 1}, {0.5, 0.6, 0.8, 0.8}, "localized", 0);
  std::vector<MetricsTrace> runs = {a};
  StrategySummary s = aggregate_runs(runs, 0.8);
  auto j = nlohmann::ordered_json::parse(summary_json(s));
  std::vector<std::string> keys;
  for (auto& [k, v] : j.items()) keys.push_back(k);
  std::vector<std::string> expected = {"strategy", "b", "A_f", "f", "interactions_to_f",
                                       "mean_itb", "a_max"};
  REQUIRE(keys.size() >= expected.size());
  CHECK(std::vector<std::string>(keys.begin(), keys.begin() + 7) == expected);
  CHECK(j["strategy"] == "localized");
  CHECK(j["b"] == 2);
  CHECK(j["f"] == 2);
  std::vector<StrategySummary> all = {s};
  std::string cmp = comparison_csv(all);
  CHECK(cmp.rfind("strategy,b,runs,runs_reached,A_f,a_max,f,interactions_to_f,mean_itb\n", 0) == 0);
  CHECK(cmp.find("\nlocalized,2,1,1,0.8,0.8,2,1,") != std::string::npos);
}

}  // TEST_SUITE
