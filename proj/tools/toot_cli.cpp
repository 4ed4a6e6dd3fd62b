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


// toot: scenario generation, strategy comparison and the ground-station
// service. Progress goes to stderr; results only to files.

#include <cmath>
#include <csignal>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "toot/toot.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitIncomplete = 3;

int report(toot_status st, const char* what) {
  std::fprintf(stderr, "toot: %s failed (%s): %s\n", what, toot_status_name(st),
               toot_last_error());
  return kExitFailure;
}

struct GenOptions {
  toot_gen_params params;
  bool distractor = false;
  std::uint64_t seed = 1;

  toot_gen_params resolved() const {
    toot_gen_params p = params;
    p.distractor = distractor ? 1 : 0;
    return p;
  }
};

void add_gen_options(CLI::App* cmd, GenOptions& g) {
  toot_gen_params_default(&g.params);
  cmd->add_option("--frames", g.params.train_frames, "Training stream length");
  cmd->add_option("--test-frames", g.params.test_frames, "Balanced test set size");
  cmd->add_option("--frame-size", g.params.frame_size, "Frame side in pixels");
  cmd->add_option("--sprite-min", g.params.sprite_min, "Smallest target side in pixels");
  cmd->add_option("--sprite-max", g.params.sprite_max, "Largest target side in pixels");
  cmd->add_option("--max-speed", g.params.max_speed, "Bound on target motion, px/frame");
  cmd->add_option("--backgrounds", g.params.background_count, "Number of background classes");
  cmd->add_flag("--distractor", g.distractor, "Add a distractor object");
}

// Loads --scenario when given, otherwise generates one from the options.
toot_status open_scenario(const std::string& dir, const GenOptions& g, toot_scenario** out) {
  if (!dir.empty()) return toot_scenario_load(dir.c_str(), out);
  toot_gen_params p = g.resolved();
  return toot_scenario_generate(&p, g.seed, out);
}

int cmd_gen(const GenOptions& g, const std::string& out) {
  toot_scenario* sc = nullptr;
  toot_gen_params p = g.resolved();
  if (toot_status st = toot_scenario_generate(&p, g.seed, &sc)) return report(st, "gen");
  toot_status st = toot_scenario_save(sc, out.c_str());
  std::fprintf(stderr, "toot: wrote %d train and %d test frames to %s\n",
               toot_scenario_train_frames(sc), toot_scenario_test_frames(sc), out.c_str());
  toot_scenario_free(sc);
  return st ? report(st, "gen") : 0;
}

struct RunOptions {
  std::string scenario;
  GenOptions gen;
  std::vector<std::string> strategies;
  int batch_size = 8;
  int runs = 10;
  std::uint64_t seed = 1;
  std::string out;
  int eval_every = 1;
  int threads = 0;
};

void on_progress(const toot_run_event* e, void*) {
  std::fprintf(stderr, "[%d/%d] %s run %d: A_max %.3f (%.1f s)\n", e->done, e->total,
               e->strategy, e->run, e->a_max, e->seconds);
}

int cmd_run(const RunOptions& o) {
  toot_scenario* sc = nullptr;
  if (toot_status st = open_scenario(o.scenario, o.gen, &sc)) return report(st, "scenario");
  toot_experiment* exp = nullptr;
  toot_result* res = nullptr;
  int code = 0;
  auto check = [&](toot_status st, const char* what) {
    if (st && code == 0) code = report(st, what);
    return st == TOOT_OK;
  };
  if (check(toot_experiment_create(&exp), "run")) {
    for (const std::string& s : o.strategies)
      if (!check(toot_experiment_add_strategy(exp, s.c_str(), o.batch_size), "--strategy")) break;
  }
  if (code == 0) check(toot_experiment_set_runs(exp, o.runs), "--runs");
  if (code == 0) check(toot_experiment_set_seed(exp, o.seed), "--seed");
  if (code == 0) check(toot_experiment_set_eval_every(exp, o.eval_every), "--eval-every");
  if (code == 0) check(toot_experiment_set_threads(exp, o.threads), "--threads");
  if (code == 0) check(toot_experiment_run(exp, sc, on_progress, nullptr, &res), "run");
  if (code == 0) check(toot_result_write(res, o.out.c_str()), "writing results");

  if (code == 0) {
    std::fprintf(stderr, "A_f = %.4f\n%-22s %8s %14s %10s %6s\n", toot_result_a_f(res),
                 "strategy", "A_max", "interactions", "mean ITB", "runs");
    for (int i = 0; i < toot_result_strategy_count(res); ++i) {
      toot_strategy_summary s;
      toot_result_summary(res, i, &s);
      std::fprintf(stderr, "%-22s %8.4f %14.1f %10.5f %3d/%-2d\n", s.key, s.a_max,
                   s.interactions_to_f, s.mean_itb, s.runs_reached, s.runs);
      if (s.incomplete == 0) continue;
      std::vector<int> failed(std::size_t(s.incomplete));
      toot_result_incomplete_runs(res, i, failed.data(), s.incomplete);
      for (int r : failed) std::fprintf(stderr, "toot: %s run %d did not complete\n", s.key, r);
      code = kExitIncomplete;
    }
  }
  toot_result_free(res);
  toot_experiment_free(exp);
  toot_scenario_free(sc);
  return code;
}

struct ServeOptions {
  std::string scenario;
  std::string frames;
  GenOptions gen;
  std::string strategy = "of_localized";
  int batch_size = 8;
  std::uint64_t seed = 1;
  std::string address = "127.0.0.1";
  std::uint16_t port = 8765;
  double fps = 5.0;
  bool lockstep = false;
  int window = 16;
  std::string audit;
};

int cmd_serve(const ServeOptions& o) {
  toot_station_config cfg;
  toot_station_config_default(&cfg);
  cfg.strategy = o.strategy.c_str();
  cfg.batch_size = o.batch_size;
  cfg.seed = o.seed;
  cfg.lockstep = o.lockstep ? 1 : 0;
  cfg.fps = o.fps;
  cfg.window = o.window;
  cfg.audit_dir = o.audit.empty() ? nullptr : o.audit.c_str();
  cfg.address = o.address.c_str();
  cfg.port = o.port;
  cfg.handle_signals = 1;

  toot_station* station = nullptr;
  toot_status st;
  if (!o.frames.empty()) {
    st = toot_station_create_live(o.frames.c_str(), &cfg, &station);
  } else {
    toot_scenario* sc = nullptr;
    st = open_scenario(o.scenario, o.gen, &sc);
    if (st == TOOT_OK) st = toot_station_create(sc, &cfg, &station);
    toot_scenario_free(sc);
  }
  if (st) return report(st, "serve");

  std::printf("ws://%s:%u/\n", toot_station_address(station), unsigned(toot_station_port(station)));
  std::fflush(stdout);
  std::fprintf(stderr, "toot: serving %s, %s; interrupt to stop\n", o.strategy.c_str(),
               o.lockstep ? "lockstep" : "paced");
  st = toot_station_run(station);
  if (st == TOOT_OK && !o.audit.empty()) st = toot_station_write_audit(station, o.audit.c_str());
  toot_station_free(station);
  if (st) return report(st, "serve");
  std::fprintf(stderr, "toot: stopped\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-ordered online training: scenarios, experiments, ground station"};
  app.require_subcommand(1);
  app.set_version_flag("--version", toot_version());

  GenOptions gen;
  std::string gen_out;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic scenario");
  add_gen_options(gen_cmd, gen);
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();

  RunOptions run;
  CLI::App* run_cmd = app.add_subcommand("run", "Compare strategies over seeded runs");
  run_cmd->add_option("--scenario", run.scenario, "Scenario directory (default: generate)");
  add_gen_options(run_cmd, run.gen);
  run_cmd->add_option("--scenario-seed", run.gen.seed, "Generator seed without --scenario");
  run_cmd->add_option("--strategy", run.strategies,
                      "Strategy as name or name:b, repeatable (default: the standard six)");
  run_cmd->add_option("--batch-size", run.batch_size, "Batch size for strategies without :b");
  run_cmd->add_option("--runs", run.runs, "Runs per strategy");
  run_cmd->add_option("--seed", run.seed, "Base seed of the runs");
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--eval-every", run.eval_every, "Evaluate every k-th updated frame");
  run_cmd->add_option("--threads", run.threads, "Worker threads, 0 for all cores");

  ServeOptions serve;
  CLI::App* serve_cmd = app.add_subcommand("serve", "Run the ground-station service");
  auto* scen = serve_cmd->add_option("--scenario", serve.scenario,
                                     "Scenario directory to replay (default: generate)");
  auto* live = serve_cmd->add_option("--live", serve.frames,
                                     "Directory of PNG frames to stream without ground truth");
  scen->excludes(live);
  add_gen_options(serve_cmd, serve.gen);
  serve_cmd->add_option("--scenario-seed", serve.gen.seed, "Generator seed without --scenario");
  serve_cmd->add_option("--strategy", serve.strategy, "semi_online, localized or of_localized");
  serve_cmd->add_option("--batch-size", serve.batch_size, "Mini-batch size");
  serve_cmd->add_option("--seed", serve.seed, "Run seed for model and sampling");
  serve_cmd->add_option("--address", serve.address, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Bind port, 0 for any free port");
  serve_cmd->add_option("--fps", serve.fps, "Frame rate of paced replay");
  serve_cmd->add_flag("--lockstep", serve.lockstep, "Advance only on step messages");
  serve_cmd->add_option("--window", serve.window, "Frames kept for seq-referenced tags");
  serve_cmd->add_option("--audit", serve.audit, "Directory for the audit log");

  CLI11_PARSE(app, argc, argv);

  if (*gen_cmd) return cmd_gen(gen, gen_out);
  if (*run_cmd) return cmd_run(run);
  return cmd_serve(serve);
}
