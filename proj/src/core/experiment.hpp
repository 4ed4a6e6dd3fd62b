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


// Multi-run strategy comparison: every (strategy, b, run) session is an
// independent job seeded from the experiment seed and the run index, so
// results do not depend on the number of worker threads.

#ifndef TOOT_CORE_EXPERIMENT_HPP
#define TOOT_CORE_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "trainer.hpp"

namespace toot {

struct StrategySpec {
  Strategy strategy = Strategy::kSemiOnline;
  int batch_size = 8;

  /// "semi_online_b8"
  std::string key() const;
  bool operator==(const StrategySpec&) const = default;
};

/// Parses "name" or "name:b", e.g. "localized:2".
StrategySpec parse_strategy_spec(const std::string& text, int default_batch);

/// The six configurations of the standard comparison.
std::vector<StrategySpec> default_comparison();

struct ExperimentConfig {
  std::vector<StrategySpec> strategies = default_comparison();
  int runs = 10;
  std::uint64_t seed = 1;
  int eval_every = 1;
  int threads = 0;  // 0 picks the hardware concurrency
  double mask_radius = 0.0;
  ArchConfig arch;
  AdadeltaConfig optimizer;
  TrackerConfig tracker;

  void validate() const;
};

struct StrategyResult {
  StrategySpec spec;
  std::vector<MetricsTrace> traces;  // one per run, in run order
  std::vector<std::vector<InteractionRecord>> interactions;
  StrategySummary summary;
  int incomplete = 0;  // runs aborted on a numeric error, left out of the summary
};

struct ExperimentResult {
  double a_f = 0.0;
  std::vector<StrategyResult> strategies;
};

struct RunEvent {
  StrategySpec spec;
  int run = 0;
  double a_max = 0.0;
  double seconds = 0.0;
  int done = 0;
  int total = 0;
};

ExperimentResult run_experiment(const PreparedScenario& scenario, const ExperimentConfig& config,
                                const std::function<void(const RunEvent&)>& progress = {});

std::string trace_file_name(const StrategySpec& spec, int run);
std::string summary_file_name(const StrategySpec& spec);

/// trace_<strategy>_b<b>_run<r>.csv, interactions_<...>.jsonl,
/// summary_<strategy>_b<b>.json and comparison.csv under `dir`.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace toot

#endif  // TOOT_CORE_EXPERIMENT_HPP
