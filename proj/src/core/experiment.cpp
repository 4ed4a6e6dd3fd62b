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


#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include "error.hpp"

namespace toot {

namespace fs = std::filesystem;

std::string StrategySpec::key() const {
  return std::string(to_string(strategy)) + "_b" + std::to_string(batch_size);
}

StrategySpec parse_strategy_spec(const std::string& text, int default_batch) {
  StrategySpec s;
  s.batch_size = default_batch;
  auto colon = text.find(':');
  s.strategy = parse_strategy(text.substr(0, colon));
  if (colon != std::string::npos) {
    const std::string b = text.substr(colon + 1);
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(b, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != b.size())
      fail(ErrorKind::kConfig, "bad batch size in strategy '" + text + "'");
    s.batch_size = value;
  }
  if (s.batch_size < 2 || s.batch_size % 2 != 0)
    fail(ErrorKind::kConfig, "batch size must be even and at least 2 in '" + text + "'");
  return s;
}

std::vector<StrategySpec> default_comparison() {
  return {{Strategy::kOffline, 8},   {Strategy::kSemiOnline, 8},  {Strategy::kLocalized, 2},
          {Strategy::kLocalized, 8}, {Strategy::kOfLocalized, 2}, {Strategy::kOfLocalized, 8}};
}

void ExperimentConfig::validate() const {
  require(!strategies.empty(), ErrorKind::kConfig, "no strategies to run");
  require(runs >= 1, ErrorKind::kConfig, "run count must be at least 1");
  require(eval_every >= 1, ErrorKind::kConfig, "eval_every must be at least 1");
  require(threads >= 0, ErrorKind::kConfig, "thread count must be nonnegative");
  for (std::size_t i = 0; i < strategies.size(); ++i)
    for (std::size_t j = i + 1; j < strategies.size(); ++j)
      require(!(strategies[i] == strategies[j]), ErrorKind::kConfig,
              "strategy " + strategies[i].key() + " listed twice");
  arch.validate();
}

ExperimentResult run_experiment(const PreparedScenario& scenario, const ExperimentConfig& config,
                                const std::function<void(const RunEvent&)>& progress) {
  config.validate();
  const int n_strat = int(config.strategies.size());
  const int total = n_strat * config.runs;

  ExperimentResult result;
  result.strategies.resize(n_strat);
  for (int s = 0; s < n_strat; ++s) {
    result.strategies[s].spec = config.strategies[s];
    result.strategies[s].traces.resize(config.runs);
    result.strategies[s].interactions.resize(config.runs);
  }

  std::atomic<int> next{0};
  std::mutex mu;
  int done = 0;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      const int job = next.fetch_add(1);
      if (job >= total) return;
      {
        std::lock_guard lock(mu);
        if (error) return;
      }
      const int s = job / config.runs;
      const int r = job % config.runs;
      const StrategySpec& spec = config.strategies[s];
      try {
        StrategyConfig sc;
        sc.strategy = spec.strategy;
        sc.batch_size = spec.batch_size;
        sc.runs = config.runs;
        sc.seed = config.seed;
        sc.eval_every = config.eval_every;
        sc.mask_radius = config.mask_radius;
        sc.optimizer = config.optimizer;
        sc.tracker = config.tracker;
        const auto t0 = std::chrono::steady_clock::now();
        SessionResult session = run_session(scenario, sc, config.arch, run_seed(config.seed, r));
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        session.trace.run = r;
        std::lock_guard lock(mu);
        StrategyResult& out = result.strategies[s];
        out.traces[r] = std::move(session.trace);
        out.interactions[r] = std::move(session.interactions);
        ++done;
        if (progress) {
          const MetricsTrace& t = out.traces[r];
          progress({spec, r, t.n() > 0 ? a_max(t) : t.A[0], secs, done, total});
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };

  int threads = config.threads > 0 ? config.threads : int(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, total);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  // Runs aborted on a numeric error stay in the trace files but not in the
  // summaries.
  std::vector<std::vector<MetricsTrace>> complete(n_strat);
  for (int s = 0; s < n_strat; ++s) {
    for (const MetricsTrace& t : result.strategies[s].traces) {
      if (t.complete)
        complete[s].push_back(t);
      else
        ++result.strategies[s].incomplete;
    }
    if (complete[s].empty())
      fail(ErrorKind::kNumeric,
           "every run of " + result.strategies[s].spec.key() + " aborted on a numeric error");
  }
  result.a_f = mean_a_max(complete[0]);
  for (int s = 1; s < n_strat; ++s) result.a_f = std::min(result.a_f, mean_a_max(complete[s]));
  for (int s = 0; s < n_strat; ++s)
    result.strategies[s].summary = aggregate_runs(complete[s], result.a_f);
  return result;
}

std::string trace_file_name(const StrategySpec& spec, int run) {
  return "trace_" + spec.key() + "_run" + std::to_string(run) + ".csv";
}

std::string summary_file_name(const StrategySpec& spec) { return "summary_" + spec.key() + ".json"; }

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace

void write_experiment(const ExperimentResult& result, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<StrategySummary> summaries;
  for (const StrategyResult& s : result.strategies) {
    for (std::size_t r = 0; r < s.traces.size(); ++r) {
      write_file(dir / trace_file_name(s.spec, int(r)),
                 trace_csv(std::span<const MetricsTrace>(&s.traces[r], 1)));
      write_file(dir / ("interactions_" + s.spec.key() + "_run" + std::to_string(r) + ".jsonl"),
                 interactions_jsonl(s.interactions[r]));
    }
    write_file(dir / summary_file_name(s.spec), summary_json(s.summary));
    summaries.push_back(s.summary);
  }
  write_file(dir / "comparison.csv", comparison_csv(summaries));
}

}  // namespace toot
