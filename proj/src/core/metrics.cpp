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

#include "metrics.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "error.hpp"

namespace toot {

namespace {

void check_frame(const MetricsTrace& t, int i) {
  if (i < 1 || i > t.n())
    fail(ErrorKind::kUndefined, "frame index " + std::to_string(i) + " outside [1, " +
                                    std::to_string(t.n()) + "]");
}

void check_interaction(const MetricsTrace& t, int i) {
  check_frame(t, i);
  if (t.u_at(i) != 1)
    fail(ErrorKind::kUndefined, "no user interaction at frame " + std::to_string(i));
}

// Index of the next interaction after i, or n + 1.
int next_interaction(const MetricsTrace& t, int i) {
  for (int k = i + 1; k <= t.n(); ++k)
    if (t.u_at(k) == 1) return k;
  return t.n() + 1;
}

}  // namespace

void MetricsTrace::validate() const {
  std::size_t n = u.size();
  if (of_events.size() != n || trained.size() != n || A.size() != n + 1)
    fail(ErrorKind::kValidation, "trace vectors have inconsistent lengths");
  for (std::size_t i = 0; i < n; ++i) {
    if (u[i] != 0 && u[i] != 1) fail(ErrorKind::kValidation, "u values must be 0 or 1");
    if (of_events[i] < 0 || trained[i] < 0)
      fail(ErrorKind::kValidation, "event counts must be nonnegative");
  }
  for (double a : A)
    if (!(a >= 0.0 && a <= 1.0)) fail(ErrorKind::kValidation, "accuracy outside [0, 1]");
}

double accuracy(std::span<const Prediction> predictions, std::span<const Label> labels) {
  if (labels.empty()) fail(ErrorKind::kValidation, "empty test set");
  if (predictions.size() != labels.size())
    fail(ErrorKind::kUsage, "prediction and label counts differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    correct += predictions[i].label == labels[i] ? 1 : 0;
  return double(correct) / double(labels.size());
}

double accuracy(const ModelState& model, const EvalSet& test, std::span<const Label> labels) {
  std::size_t positives = 0;
  for (Label l : labels) positives += l == Label::kPositive ? 1 : 0;
  if (labels.empty()) fail(ErrorKind::kValidation, "empty test set");
  if (2 * positives != labels.size()) fail(ErrorKind::kValidation, "unbalanced test set");
  if (test.size() != labels.size()) fail(ErrorKind::kUsage, "image and label counts differ");
  std::vector<Prediction> preds = predict_many(model, test);
  return accuracy(preds, labels);
}

double ctb_frame(const MetricsTrace& t, int i) {
  check_frame(t, i);
  return t.A[i] - t.A[0];
}

double ctb_interaction(const MetricsTrace& t, int i) {
  check_interaction(t, i);
  return t.A[next_interaction(t, i) - 1] - t.A[0];
}

double itb_interaction(const MetricsTrace& t, int i) {
  check_interaction(t, i);
  return t.A[next_interaction(t, i) - 1] - t.A[i - 1];
}

int interaction_count(const MetricsTrace& t, int i, int j) {
  check_frame(t, i);
  check_frame(t, j);
  int count = 0;
  for (int x = i; x <= j; ++x) count += t.u_at(x);
  return count;
}

double mean_itb(const MetricsTrace& t, int i, int j) {
  check_frame(t, i);
  check_frame(t, j);
  double sum = 0.0;
  int count = 0;
  for (int x = i; x <= j; ++x) {
    if (t.u_at(x) != 1) continue;
    sum += itb_interaction(t, x);
    ++count;
  }
  if (count == 0)
    fail(ErrorKind::kUndefined, "no interactions in [" + std::to_string(i) + ", " +
                                    std::to_string(j) + "]");
  return sum / count;
}

double a_max(const MetricsTrace& t) {
  if (t.n() < 1) fail(ErrorKind::kUndefined, "empty trace");
  double best = t.A[1];
  for (int i = 2; i <= t.n(); ++i) best = std::max(best, t.A[i]);
  return best;
}

std::optional<int> find_f(const MetricsTrace& t, double a_f) {
  for (int i = 1; i <= t.n(); ++i)
    if (t.A[i] >= a_f) return i;
  return std::nullopt;
}

MetricsTrace truncate(const MetricsTrace& t, int f) {
  if (f < 0 || f > t.n()) fail(ErrorKind::kUsage, "truncation point outside the trace");
  MetricsTrace out = t;
  out.u.resize(f);
  out.of_events.resize(f);
  out.trained.resize(f);
  out.A.resize(std::size_t(f) + 1);
  return out;
}

StreamingMetrics::StreamingMetrics(double a0) : a_{a0} {}

void StreamingMetrics::close_open(int k) {
  int x = interaction_frames_.back();
  itb_.back() = a_[k - 1] - a_[x - 1];
  itb_sum_ += itb_.back();
  open_ = false;
}

void StreamingMetrics::push(int u, double a) {
  if (finished_) fail(ErrorKind::kUsage, "metrics stream already finished");
  if (u != 0 && u != 1) fail(ErrorKind::kValidation, "u values must be 0 or 1");
  a_.push_back(a);
  int i = frames();
  if (u == 1) {
    if (open_) close_open(i);
    interaction_frames_.push_back(i);
    itb_.push_back(0.0);
    open_ = true;
  }
  if (open_) itb_.back() = a_[i] - a_[interaction_frames_.back() - 1];
}

void StreamingMetrics::finish() {
  if (finished_) return;
  if (open_) close_open(frames() + 1);
  finished_ = true;
}

double StreamingMetrics::ctb_frame(int i) const {
  if (i < 1 || i > frames()) fail(ErrorKind::kUndefined, "frame index outside the stream");
  return a_[i] - a_[0];
}

double StreamingMetrics::mean_itb() const {
  if (interaction_frames_.empty()) fail(ErrorKind::kUndefined, "no interactions");
  double sum = open_ ? itb_sum_ + itb_.back() : itb_sum_;
  return sum / interactions();
}

double mean_a_max(std::span<const MetricsTrace> traces) {
  if (traces.empty()) fail(ErrorKind::kValidation, "no traces");
  const double ref = a_max(traces.front());
  double sum = 0.0;
  for (const MetricsTrace& t : traces) sum += a_max(t) - ref;
  return ref + sum / double(traces.size());
}

StrategySummary aggregate_runs(std::span<const MetricsTrace> traces, double a_f) {
  if (traces.empty()) fail(ErrorKind::kValidation, "no traces to aggregate");
  const MetricsTrace& first = traces.front();
  StrategySummary s;
  s.strategy = first.strategy;
  s.batch_size = first.batch_size;
  s.a_f = a_f;
  s.runs = int(traces.size());
  // Means are taken as offsets from the first run, so identical runs
  // aggregate to exactly that run.
  s.mean_A.assign(first.A.size(), 0.0);

  double inter_sum = 0.0, itb_sum = 0.0;
  std::optional<double> itb_ref;
  int itb_runs = 0;
  for (const MetricsTrace& t : traces) {
    t.validate();
    if (t.strategy != first.strategy || t.batch_size != first.batch_size || t.n() != first.n())
      fail(ErrorKind::kValidation, "traces differ in strategy, batch size or length");
    for (std::size_t i = 0; i < t.A.size(); ++i) s.mean_A[i] += t.A[i] - first.A[i];

    RunSummary r;
    r.run = t.run;
    r.a_max = a_max(t);
    r.f = find_f(t, a_f);
    MetricsTrace cut = r.f ? truncate(t, *r.f) : t;
    r.interactions_to_f = interaction_count(cut, 1, cut.n());
    if (r.interactions_to_f > 0) r.mean_itb = mean_itb(cut, 1, cut.n());

    s.runs_reached += r.f ? 1 : 0;
    inter_sum += r.interactions_to_f;
    if (r.mean_itb) {
      if (!itb_ref) itb_ref = *r.mean_itb;
      itb_sum += *r.mean_itb - *itb_ref;
      ++itb_runs;
    }
    s.per_run.push_back(r);
  }
  for (std::size_t i = 0; i < s.mean_A.size(); ++i)
    s.mean_A[i] = first.A[i] + s.mean_A[i] / double(traces.size());
  s.interactions_to_f = inter_sum / s.runs;
  s.a_max = mean_a_max(traces);
  if (itb_runs > 0) s.mean_itb = *itb_ref + itb_sum / itb_runs;

  MetricsTrace mean_trace = first;
  mean_trace.A = s.mean_A;
  s.f = find_f(mean_trace, a_f);
  return s;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trace_csv(std::span<const MetricsTrace> traces) {
  std::string out = "run,frame,u,of_events,trained,A,CTB\n";
  for (const MetricsTrace& t : traces) {
    std::string run = std::to_string(t.run);
    out += run + ",0,0,0,0," + format_number(t.A[0]) + ",\n";
    for (int i = 1; i <= t.n(); ++i) {
      out += run + ',' + std::to_string(i) + ',' + std::to_string(t.u[i - 1]) + ',' +
             std::to_string(t.of_events[i - 1]) + ',' + std::to_string(t.trained[i - 1]) + ',' +
             format_number(t.A[i]) + ',' + format_number(t.A[i] - t.A[0]) + '\n';
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json opt(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json opt(const std::optional<int>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string opt_csv(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

}  // namespace

std::string summary_json(const StrategySummary& s) {
  nlohmann::ordered_json j;
  j["strategy"] = s.strategy;
  j["b"] = s.batch_size;
  j["A_f"] = s.a_f;
  j["f"] = opt(s.f);
  j["interactions_to_f"] = s.interactions_to_f;
  j["mean_itb"] = opt(s.mean_itb);
  j["a_max"] = s.a_max;
  j["runs"] = s.runs;
  j["runs_reached"] = s.runs_reached;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const RunSummary& r : s.per_run) {
    nlohmann::ordered_json e;
    e["run"] = r.run;
    e["a_max"] = r.a_max;
    e["f"] = opt(r.f);
    e["interactions_to_f"] = r.interactions_to_f;
    e["mean_itb"] = opt(r.mean_itb);
    runs.push_back(std::move(e));
  }
  j["per_run"] = std::move(runs);
  return j.dump(2) + "\n";
}

std::string comparison_csv(std::span<const StrategySummary> summaries) {
  std::string out = "strategy,b,runs,runs_reached,A_f,a_max,f,interactions_to_f,mean_itb\n";
  for (const StrategySummary& s : summaries) {
    out += s.strategy + ',' + std::to_string(s.batch_size) + ',' + std::to_string(s.runs) + ',' +
           std::to_string(s.runs_reached) + ',' + format_number(s.a_f) + ',' +
           format_number(s.a_max) + ',' + (s.f ? std::to_string(*s.f) : std::string()) + ',' +
           format_number(s.interactions_to_f) + ',' + opt_csv(s.mean_itb) + '\n';
  }
  return out;
}

std::vector<MetricsTrace> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "run,frame,u,of_events,trained,A,CTB")
    fail(ErrorKind::kParse, "trace csv: unexpected header");
  std::map<int, MetricsTrace> by_run;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    std::string where = "trace csv line " + std::to_string(line_no);
    if (cells.size() != 7) fail(ErrorKind::kParse, where + ": expected 7 columns");
    auto int_at = [&](int c) {
      int v = 0;
      auto [p, ec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
      if (ec != std::errc() || p != cells[c].data() + cells[c].size())
        fail(ErrorKind::kParse, where + ": bad integer in column " + std::to_string(c + 1));
      return v;
    };
    double a = 0.0;
    {
      auto [p, ec] = std::from_chars(cells[5].data(), cells[5].data() + cells[5].size(), a);
      if (ec != std::errc() || p != cells[5].data() + cells[5].size())
        fail(ErrorKind::kParse, where + ": bad accuracy");
    }
    int run = int_at(0), frame = int_at(1);
    MetricsTrace& t = by_run[run];
    t.run = run;
    if (frame != int(t.A.size())) fail(ErrorKind::kParse, where + ": frames out of order");
    t.A.push_back(a);
    if (frame > 0) {
      t.u.push_back(int_at(2));
      t.of_events.push_back(int_at(3));
      t.trained.push_back(int_at(4));
    }
  }
  std::vector<MetricsTrace> out;
  for (auto& [run, t] : by_run) out.push_back(std::move(t));
  return out;
}

}  // namespace toot
