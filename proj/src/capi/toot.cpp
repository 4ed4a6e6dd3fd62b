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


#include "toot/toot.h"

#include <cmath>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "error.hpp"
#include "experiment.hpp"
#include "scenario.hpp"
#include "server.hpp"
#include "station.hpp"

struct toot_scenario {
  std::shared_ptr<const toot::Scenario> scenario;
};

struct toot_experiment {
  toot::ExperimentConfig config;
  bool custom_strategies = false;
};

struct toot_result {
  toot::ExperimentResult result;
  std::vector<std::string> keys;
};

struct toot_station {
  std::shared_ptr<toot::station::Station> station;
  std::unique_ptr<toot::station::Server> server;
  std::string address;
};

namespace {

thread_local std::string g_last_error;

toot_status status_of(toot::ErrorKind kind) {
  switch (kind) {
    case toot::ErrorKind::kConfig: return TOOT_ERR_CONFIG;
    case toot::ErrorKind::kUsage: return TOOT_ERR_USAGE;
    case toot::ErrorKind::kNumeric: return TOOT_ERR_NUMERIC;
    case toot::ErrorKind::kParse: return TOOT_ERR_PARSE;
    case toot::ErrorKind::kValidation: return TOOT_ERR_VALIDATION;
    case toot::ErrorKind::kDegenerateMask: return TOOT_ERR_DEGENERATE_MASK;
    case toot::ErrorKind::kUndefined: return TOOT_ERR_UNDEFINED;
    case toot::ErrorKind::kIo: return TOOT_ERR_IO;
    case toot::ErrorKind::kProtocol: return TOOT_ERR_PROTOCOL;
  }
  return TOOT_ERR_INTERNAL;
}

template <class F>
toot_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return TOOT_OK;
  } catch (const toot::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return TOOT_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) toot::fail(toot::ErrorKind::kUsage, std::string(what) + " is NULL");
}

toot::GenParams gen_params(const toot_gen_params& p) {
  toot::GenParams g;
  g.frame_size = p.frame_size;
  g.train_frames = p.train_frames;
  g.test_frames = p.test_frames;
  g.sprite_min = p.sprite_min;
  g.sprite_max = p.sprite_max;
  g.max_speed = p.max_speed;
  g.cruise_speed = p.cruise_speed;
  g.present_min = p.present_min;
  g.present_max = p.present_max;
  g.absent_min = p.absent_min;
  g.absent_max = p.absent_max;
  g.background_count = p.background_count;
  g.distractor = p.distractor != 0;
  g.jitter = p.jitter;
  return g;
}

toot::station::StationConfig station_config(const toot_station_config& c) {
  toot::station::StationConfig s;
  need(c.strategy, "strategy");
  s.strategy.strategy = toot::parse_strategy(c.strategy);
  s.strategy.batch_size = c.batch_size;
  s.seed = c.seed;
  s.pacing = c.lockstep ? toot::station::Pacing::kLockstep : toot::station::Pacing::kPaced;
  s.fps = c.fps;
  s.window = c.window;
  s.display_size = c.display_size;
  if (c.audit_dir) s.audit_dir = c.audit_dir;
  return s;
}

toot_station* serve(std::shared_ptr<toot::station::Station> station,
                    const toot_station_config& c) {
  need(c.address, "address");
  auto out = std::make_unique<toot_station>();
  out->station = std::move(station);
  out->server = std::make_unique<toot::station::Server>(
      *out->station, toot::station::ServerOptions{c.address, c.port, c.handle_signals != 0});
  out->address = out->server->address();
  return out.release();
}

}  // namespace

extern "C" {

const char* toot_version(void) { return "0.1.0"; }

const char* toot_status_name(toot_status status) {
  switch (status) {
    case TOOT_OK: return "ok";
    case TOOT_ERR_CONFIG: return "config";
    case TOOT_ERR_USAGE: return "usage";
    case TOOT_ERR_NUMERIC: return "numeric";
    case TOOT_ERR_PARSE: return "parse";
    case TOOT_ERR_VALIDATION: return "validation";
    case TOOT_ERR_DEGENERATE_MASK: return "degenerate_mask";
    case TOOT_ERR_UNDEFINED: return "undefined";
    case TOOT_ERR_IO: return "io";
    case TOOT_ERR_PROTOCOL: return "protocol";
    case TOOT_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* toot_last_error(void) { return g_last_error.c_str(); }

void toot_gen_params_default(toot_gen_params* params) {
  if (!params) return;
  toot::GenParams g;
  *params = toot_gen_params{g.frame_size,   g.train_frames, g.test_frames,      g.sprite_min,
                            g.sprite_max,   g.max_speed,    g.cruise_speed,     g.present_min,
                            g.present_max,  g.absent_min,   g.absent_max,       g.background_count,
                            g.distractor ? 1 : 0, g.jitter};
}

toot_status toot_scenario_generate(const toot_gen_params* params, uint64_t seed,
                                   toot_scenario** out) {
  return guarded([&] {
    need(params, "params");
    need(out, "out");
    *out = nullptr;
    auto sc = std::make_shared<const toot::Scenario>(
        toot::generate_scenario(gen_params(*params), seed));
    *out = new toot_scenario{std::move(sc)};
  });
}

toot_status toot_scenario_load(const char* dir, toot_scenario** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = nullptr;
    *out = new toot_scenario{std::make_shared<const toot::Scenario>(toot::load_scenario(dir))};
  });
}

toot_status toot_scenario_save(const toot_scenario* scenario, const char* dir) {
  return guarded([&] {
    need(scenario, "scenario");
    need(dir, "dir");
    toot::save_scenario(*scenario->scenario, dir);
  });
}

int toot_scenario_train_frames(const toot_scenario* scenario) {
  return scenario ? int(scenario->scenario->train.size()) : 0;
}

int toot_scenario_test_frames(const toot_scenario* scenario) {
  return scenario ? int(scenario->scenario->test.size()) : 0;
}

void toot_scenario_free(toot_scenario* scenario) { delete scenario; }

toot_status toot_experiment_create(toot_experiment** out) {
  return guarded([&] {
    need(out, "out");
    *out = new toot_experiment{};
  });
}

toot_status toot_experiment_add_strategy(toot_experiment* exp, const char* spec,
                                         int default_batch) {
  return guarded([&] {
    need(exp, "experiment");
    need(spec, "spec");
    toot::StrategySpec parsed = toot::parse_strategy_spec(spec, default_batch);
    if (!exp->custom_strategies) exp->config.strategies.clear();
    exp->custom_strategies = true;
    for (const toot::StrategySpec& s : exp->config.strategies)
      if (s == parsed)
        toot::fail(toot::ErrorKind::kConfig, "strategy " + parsed.key() + " listed twice");
    exp->config.strategies.push_back(parsed);
  });
}

toot_status toot_experiment_set_runs(toot_experiment* exp, int runs) {
  return guarded([&] {
    need(exp, "experiment");
    toot::require(runs >= 1, toot::ErrorKind::kConfig, "runs must be at least 1");
    exp->config.runs = runs;
  });
}

toot_status toot_experiment_set_seed(toot_experiment* exp, uint64_t seed) {
  return guarded([&] {
    need(exp, "experiment");
    exp->config.seed = seed;
  });
}

toot_status toot_experiment_set_eval_every(toot_experiment* exp, int eval_every) {
  return guarded([&] {
    need(exp, "experiment");
    toot::require(eval_every >= 1, toot::ErrorKind::kConfig, "eval_every must be at least 1");
    exp->config.eval_every = eval_every;
  });
}

toot_status toot_experiment_set_threads(toot_experiment* exp, int threads) {
  return guarded([&] {
    need(exp, "experiment");
    toot::require(threads >= 0, toot::ErrorKind::kConfig, "threads must be >= 0");
    exp->config.threads = threads;
  });
}

toot_status toot_experiment_run(const toot_experiment* exp, const toot_scenario* scenario,
                                toot_progress_fn progress, void* user, toot_result** out) {
  return guarded([&] {
    need(exp, "experiment");
    need(scenario, "scenario");
    need(out, "out");
    *out = nullptr;
    exp->config.validate();
    toot::PreparedScenario prepared =
        toot::prepare_scenario(scenario->scenario, exp->config.arch, exp->config.tracker);
    std::function<void(const toot::RunEvent&)> cb;
    if (progress)
      cb = [&](const toot::RunEvent& e) {
        std::string key = e.spec.key();
        toot_run_event ev{key.c_str(), e.run, e.a_max, e.seconds, e.done, e.total};
        progress(&ev, user);
      };
    auto res = std::make_unique<toot_result>();
    res->result = toot::run_experiment(prepared, exp->config, cb);
    for (const toot::StrategyResult& s : res->result.strategies) res->keys.push_back(s.spec.key());
    *out = res.release();
  });
}

void toot_experiment_free(toot_experiment* exp) { delete exp; }

double toot_result_a_f(const toot_result* result) {
  return result ? result->result.a_f : std::numeric_limits<double>::quiet_NaN();
}

int toot_result_strategy_count(const toot_result* result) {
  return result ? int(result->result.strategies.size()) : 0;
}

toot_status toot_result_summary(const toot_result* result, int index,
                                toot_strategy_summary* out) {
  return guarded([&] {
    need(result, "result");
    need(out, "out");
    toot::require(index >= 0 && index < int(result->result.strategies.size()),
                  toot::ErrorKind::kUsage, "strategy index out of range");
    const toot::StrategyResult& s = result->result.strategies[index];
    const toot::StrategySummary& m = s.summary;
    *out = toot_strategy_summary{result->keys[index].c_str(),
                                 m.a_max,
                                 m.interactions_to_f,
                                 m.mean_itb.value_or(std::numeric_limits<double>::quiet_NaN()),
                                 m.f.value_or(-1),
                                 m.runs,
                                 m.runs_reached,
                                 s.incomplete};
  });
}

int toot_result_incomplete_runs(const toot_result* result, int index, int* runs, int capacity) {
  if (!result || index < 0 || index >= int(result->result.strategies.size())) return 0;
  int count = 0;
  for (const toot::MetricsTrace& t : result->result.strategies[index].traces) {
    if (t.complete) continue;
    if (runs && count < capacity) runs[count] = t.run;
    ++count;
  }
  return count;
}

toot_status toot_result_write(const toot_result* result, const char* dir) {
  return guarded([&] {
    need(result, "result");
    need(dir, "dir");
    toot::write_experiment(result->result, dir);
  });
}

void toot_result_free(toot_result* result) { delete result; }

void toot_station_config_default(toot_station_config* config) {
  if (!config) return;
  toot::station::StationConfig d;
  *config = toot_station_config{"of_localized", d.strategy.batch_size, d.seed, 0, d.fps,
                                d.window, d.display_size, nullptr, "127.0.0.1", 8765, 0};
}

toot_status toot_station_create(const toot_scenario* scenario, const toot_station_config* config,
                                toot_station** out) {
  return guarded([&] {
    need(scenario, "scenario");
    need(config, "config");
    need(out, "out");
    *out = nullptr;
    toot::station::StationConfig sc = station_config(*config);
    toot::ArchConfig arch;
    auto prepared = std::make_shared<const toot::PreparedScenario>(
        toot::prepare_scenario(scenario->scenario, arch, sc.strategy.tracker));
    auto station = std::make_shared<toot::station::Station>(
        std::make_shared<toot::station::ScenarioSource>(prepared), arch, sc, prepared->test);
    *out = serve(std::move(station), *config);
  });
}

toot_status toot_station_create_live(const char* frames_dir, const toot_station_config* config,
                                     toot_station** out) {
  return guarded([&] {
    need(frames_dir, "frames_dir");
    need(config, "config");
    need(out, "out");
    *out = nullptr;
    toot::station::StationConfig sc = station_config(*config);
    toot::ArchConfig arch;
    auto source =
        std::make_shared<toot::station::DirectorySource>(frames_dir, arch, sc.strategy.tracker);
    auto station = std::make_shared<toot::station::Station>(source, arch, sc);
    *out = serve(std::move(station), *config);
  });
}

uint16_t toot_station_port(const toot_station* station) {
  return station ? station->server->port() : 0;
}

const char* toot_station_address(const toot_station* station) {
  return station ? station->address.c_str() : "";
}

toot_status toot_station_run(toot_station* station) {
  return guarded([&] {
    need(station, "station");
    station->server->run();
  });
}

void toot_station_stop(toot_station* station) {
  if (station) station->server->stop();
}

toot_status toot_station_write_audit(const toot_station* station, const char* dir) {
  return guarded([&] {
    need(station, "station");
    need(dir, "dir");
    station->station->write_audit(dir);
  });
}

void toot_station_free(toot_station* station) { delete station; }

}  // extern "C"
