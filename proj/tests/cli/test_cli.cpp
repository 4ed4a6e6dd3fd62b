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


// Runs the toot executable as a child process.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "helpers.hpp"
#include "scenario.hpp"
#include "ws_client.hpp"

extern char** environ;

namespace fs = std::filesystem;
using toot::testing::scratch_dir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Child {
 public:
  Child(const std::vector<std::string>& args, const fs::path& dir) : out_(dir / "stdout"),
                                                                      err_(dir / "stderr") {
    std::vector<std::string> full{TOOT_CLI_PATH};
    full.insert(full.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (std::string& a : full) argv.push_back(a.data());
    argv.push_back(nullptr);
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, 1, out_.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_addopen(&fa, 2, err_.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    int rc = posix_spawn(&pid_, argv[0], &fa, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&fa);
    REQUIRE(rc == 0);
  }

  ~Child() {
    if (pid_ > 0) {
      kill(pid_, SIGKILL);
      wait();
    }
  }

  int wait() {
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  }

  void interrupt() { kill(pid_, SIGINT); }

  /// First complete stdout line, waiting up to `seconds`.
  std::string first_line(double seconds = 20.0) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
    while (std::chrono::steady_clock::now() < deadline) {
      std::string text = slurp(out_);
      auto nl = text.find('\n');
      if (nl != std::string::npos) return text.substr(0, nl);
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return {};
  }

  std::string out() const { return slurp(out_); }
  std::string err() const { return slurp(err_); }

 private:
  fs::path out_, err_;
  pid_t pid_ = -1;
};

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args, const fs::path& dir) {
  Child c(args, dir);
  int code = c.wait();
  return {code, c.out(), c.err()};
}

// Relative path -> contents of every regular file under `dir`.
std::vector<std::pair<std::string, std::string>> tree(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir).string(), slurp(e));
  std::sort(files.begin(), files.end());
  return files;
}

const std::vector<std::string> kSmall = {"--frames", "30", "--test-frames", "20"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

unsigned short port_of(const std::string& url) {
  std::smatch m;
  static const std::regex re(R"(^ws://127\.0\.0\.1:(\d+)/$)");
  REQUIRE(std::regex_match(url, m, re));
  return static_cast<unsigned short>(std::stoi(m[1]));
}

}  // namespace

TEST_CASE("gen writes a loadable scenario, byte-identical on rerun") {
  fs::path dir = scratch_dir("cli_gen");
  auto args = with({"gen", "--seed", "1"}, kSmall);
  Result a = run(with(args, {"--out", (dir / "s1").string()}), dir);
  REQUIRE(a.code == 0);
  CHECK(a.out.empty());
  Result b = run(with(args, {"--out", (dir / "s2").string()}), dir);
  REQUIRE(b.code == 0);
  CHECK(tree(dir / "s1") == tree(dir / "s2"));
  toot::Scenario sc = toot::load_scenario(dir / "s1");
  CHECK(sc.train.size() == 30);
  CHECK(sc.test.size() == 20);

  toot::GenParams g;
  g.train_frames = 30;
  g.test_frames = 20;
  CHECK(sc.train == toot::generate_scenario(g, 1).train);
}

TEST_CASE("gen rejects invalid parameters") {
  fs::path dir = scratch_dir("cli_gen_bad");
  Result r = run({"gen", "--frames", "0", "--out", (dir / "s").string()}, dir);
  CHECK(r.code != 0);
  CHECK(r.err.find("train_frames") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "s"));
  r = run({"gen", "--sprite-min", "20", "--sprite-max", "10", "--out", (dir / "s").string()},
          dir);
  CHECK(r.code != 0);
  CHECK_FALSE(r.err.empty());
  r = run({"gen", "--out", (dir / "s").string(), "--colour", "red"}, dir);
  CHECK(r.code != 0);
  r = run({"gen"}, dir);
  CHECK(r.code != 0);
}

TEST_CASE("run emits six summaries and repeats exactly") {
  fs::path dir = scratch_dir("cli_run");
  auto args = with({"run", "--runs", "1", "--seed", "42"}, kSmall);
  Result a = run(with(args, {"--out", (dir / "a").string()}), dir);
  REQUIRE(a.code == 0);
  CHECK(a.out.empty());
  CHECK(a.err.find("[6/6]") != std::string::npos);
  Result b = run(with(args, {"--out", (dir / "b").string()}), dir);
  REQUIRE(b.code == 0);
  auto files = tree(dir / "a");
  CHECK(files == tree(dir / "b"));
  int summaries = 0, traces = 0;
  for (const auto& [name, _] : files) {
    summaries += name.rfind("summary_", 0) == 0;
    traces += name.rfind("trace_", 0) == 0;
  }
  CHECK(summaries == 6);
  CHECK(traces == 6);
  CHECK(fs::exists(dir / "a" / "comparison.csv"));
}

TEST_CASE("run with explicit strategies and a saved scenario") {
  fs::path dir = scratch_dir("cli_run_explicit");
  REQUIRE(run(with({"gen", "--seed", "2", "--out", (dir / "s").string()}, kSmall), dir).code == 0);
  Result r = run({"run", "--scenario", (dir / "s").string(), "--strategy", "semi_online",
                  "--strategy", "of_localized:2", "--batch-size", "4", "--runs", "2",
                  "--threads", "2", "--out", (dir / "o").string()},
                 dir);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "o" / "summary_semi_online_b4.json"));
  CHECK(fs::exists(dir / "o" / "summary_of_localized_b2.json"));
  CHECK(fs::exists(dir / "o" / "trace_of_localized_b2_run1.csv"));
  CHECK_FALSE(fs::exists(dir / "o" / "summary_offline_b8.json"));
}

TEST_CASE("run diagnostics") {
  fs::path dir = scratch_dir("cli_run_bad");
  Result r = run({"run", "--scenario", (dir / "nowhere").string(), "--out", (dir / "o").string()},
                 dir);
  CHECK(r.code != 0);
  CHECK(r.err.find("nowhere") != std::string::npos);
  r = run(with({"run", "--strategy", "localized:3", "--out", (dir / "o").string()}, kSmall), dir);
  CHECK(r.code != 0);
  CHECK(r.err.find("localized:3") != std::string::npos);
  r = run(with({"run", "--runs", "0", "--out", (dir / "o").string()}, kSmall), dir);
  CHECK(r.code != 0);
}

TEST_CASE("serve prints its address, serves the scenario and stops on interrupt") {
  fs::path dir = scratch_dir("cli_serve");
  REQUIRE(run(with({"gen", "--seed", "5", "--out", (dir / "s").string()}, kSmall), dir).code == 0);
  fs::create_directories(dir / "p1");
  Child server({"serve", "--scenario", (dir / "s").string(), "--port", "0", "--lockstep",
                "--audit", (dir / "audit").string()},
               dir / "p1");
  std::string url = server.first_line();
  unsigned short port = port_of(url);

  {
    toot::testing::WsClient client("127.0.0.1", port);
    auto hello = client.recv();
    REQUIRE(hello);
    REQUIRE(std::holds_alternative<toot::proto::HelloMessage>(*hello));
    CHECK(std::get<toot::proto::HelloMessage>(*hello).frames == 30);
    client.send(toot::proto::ControlMessage{toot::proto::ControlAction::kStart});
    auto frame = client.recv();
    REQUIRE(frame);
    REQUIRE(std::holds_alternative<toot::proto::FrameMessage>(*frame));
    const auto& f = std::get<toot::proto::FrameMessage>(*frame);
    CHECK(f.frame_index == 1);
    toot::Scenario sc = toot::load_scenario(dir / "s");
    CHECK(toot::decode_png(toot::proto::base64_decode(f.image)) ==
          toot::resize_nearest(sc.train[0].image, 224, 224));
    client.send(toot::proto::ClickMessage{f.seq, 0.5, 0.5});
    client.send(toot::proto::ControlMessage{toot::proto::ControlAction::kStep});
    auto next = client.recv();
    REQUIRE(next);
    CHECK(std::get<toot::proto::FrameMessage>(*next).model_version >= 1);
  }

  fs::create_directories(dir / "p2");
  Result busy = run(with({"serve", "--port", std::to_string(port)}, kSmall), dir / "p2");
  CHECK(busy.code != 0);
  CHECK(busy.err.find("in use") != std::string::npos);

  server.interrupt();
  CHECK(server.wait() == 0);
  CHECK(server.err().find("stopped") != std::string::npos);
  CHECK(slurp(dir / "audit" / "interactions.jsonl").find("\"click\"") != std::string::npos);
}
