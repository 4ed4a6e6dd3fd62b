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

// Training-benefit metrics over a time-ordered session.
//
// Frames are indexed 1..n. u[i] = 1 when the user interacted on frame i,
// A[i] is the test accuracy in force after round i, A[0] the untrained
// accuracy. For an interaction at i with the next interaction at k (k = n+1
// if there is none):
//   CTB_i     = A_i - A_0                  (per frame)
//   CTB_{u_i} = A_{k-1} - A_0              (per interaction)
//   ITB_{u_i} = A_{k-1} - A_{i-1}
//   mean ITB over [i, j] = sum of ITB / number of interactions in [i, j]

#ifndef TOOT_CORE_METRICS_HPP
#define TOOT_CORE_METRICS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nn.hpp"

namespace toot {

struct MetricsTrace {
  std::string strategy;
  int batch_size = 0;
  int run = 0;
  std::uint64_t seed = 0;
  std::vector<int> u;          // [n], index 0 is frame 1
  std::vector<int> of_events;  // [n]
  std::vector<int> trained;    // [n], gradient updates this round
  std::vector<double> A;       // [n + 1], A[0] untrained
  bool complete = true;

  int n() const { return int(u.size()); }
  int u_at(int i) const { return u[std::size_t(i) - 1]; }

  /// Length and range checks, u in {0,1}, A in [0,1].
  void validate() const;
  bool operator==(const MetricsTrace&) const = default;
};

double accuracy(std::span<const Prediction> predictions, std::span<const Label> labels);
/// Requires a nonempty, exactly balanced label set.
double accuracy(const ModelState& model, const EvalSet& test, std::span<const Label> labels);

double ctb_frame(const MetricsTrace& t, int i);
double ctb_interaction(const MetricsTrace& t, int i);
double itb_interaction(const MetricsTrace& t, int i);
int interaction_count(const MetricsTrace& t, int i, int j);
double mean_itb(const MetricsTrace& t, int i, int j);

double a_max(const MetricsTrace& t);
/// Smallest i in [1, n] with A_i >= a_f.
std::optional<int> find_f(const MetricsTrace& t, double a_f);
/// First f frames of the trace, as if the run had stopped there.
MetricsTrace truncate(const MetricsTrace& t, int f);

/// Consumes a session frame by frame and keeps CTB/ITB up to date; equal to
/// the post-hoc functions above on the same (u, A).
class StreamingMetrics {
 public:
  explicit StreamingMetrics(double a0);

  void push(int u, double a);
  /// Closes the last interaction with k = n + 1.
  void finish();

  int frames() const { return int(a_.size()) - 1; }
  int interactions() const { return int(interaction_frames_.size()); }
  double ctb_frame(int i) const;
  /// ITB per interaction in order; the last one is provisional until finish().
  const std::vector<double>& itb() const { return itb_; }
  const std::vector<int>& interaction_frames() const { return interaction_frames_; }
  double itb_sum() const { return itb_sum_; }
  double mean_itb() const;

 private:
  void close_open(int k);

  std::vector<double> a_;
  std::vector<int> interaction_frames_;
  std::vector<double> itb_;
  double itb_sum_ = 0.0;
  bool open_ = false;
  bool finished_ = false;
};

struct RunSummary {
  int run = 0;
  double a_max = 0.0;
  std::optional<int> f;
  int interactions_to_f = 0;   // all interactions when A_f is never reached
  std::optional<double> mean_itb;
};

struct StrategySummary {
  std::string strategy;
  int batch_size = 0;
  double a_f = 0.0;
  std::optional<int> f;                // on the run-averaged accuracy curve
  double interactions_to_f = 0.0;      // mean over runs
  std::optional<double> mean_itb;      // mean over runs that have one
  double a_max = 0.0;                  // mean over runs
  int runs = 0;
  int runs_reached = 0;
  std::vector<double> mean_A;          // element-wise mean, [n + 1]
  std::vector<RunSummary> per_run;
};

double mean_a_max(std::span<const MetricsTrace> traces);

/// Element-wise mean accuracy and the per-strategy summary at a common A_f.
StrategySummary aggregate_runs(std::span<const MetricsTrace> traces, double a_f);

// Output files. Numbers use the shortest round-trip decimal form.
std::string format_number(double v);
std::string trace_csv(std::span<const MetricsTrace> traces);
std::string summary_json(const StrategySummary& s);
std::string comparison_csv(std::span<const StrategySummary> summaries);
std::vector<MetricsTrace> parse_trace_csv(const std::string& text);

}  // namespace toot

#endif  // TOOT_CORE_METRICS_HPP
