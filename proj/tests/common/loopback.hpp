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


// Scripted operator: replays the simulated user over the wire against a
// lockstep station and rebuilds the accuracy curve from what it receives.

#ifndef TOOT_TESTS_LOOPBACK_HPP
#define TOOT_TESTS_LOOPBACK_HPP

#include <optional>
#include <stdexcept>
#include <thread>
#include <variant>
#include <vector>

#include "server.hpp"
#include "trainer.hpp"
#include "ws_client.hpp"

namespace toot::testing {

struct LoopbackRun {
  std::vector<proto::FrameMessage> frames;
  std::optional<proto::EndMessage> end;
  std::vector<proto::ErrorMessage> errors;
  std::vector<double> accuracy;  // A_0 .. A_n as seen by the client
  int interactions = 0;
};

inline LoopbackRun replay_simulated_user(WsClient& client, const Scenario& scenario,
                                         Strategy strategy) {
  LoopbackRun run;
  auto hello = client.recv();
  if (!hello || !std::holds_alternative<proto::HelloMessage>(*hello))
    throw std::runtime_error("expected hello");
  client.send(proto::ControlMessage{proto::ControlAction::kStart});
  while (auto msg = client.recv()) {
    if (auto* err = std::get_if<proto::ErrorMessage>(&*msg)) {
      run.errors.push_back(*err);
      continue;
    }
    if (auto* end = std::get_if<proto::EndMessage>(&*msg)) {
      run.end = *end;
      if (end->accuracy) run.accuracy.push_back(*end->accuracy);
      break;
    }
    const auto* frame = std::get_if<proto::FrameMessage>(&*msg);
    if (!frame) throw std::runtime_error("unexpected message");
    run.frames.push_back(*frame);
    if (frame->accuracy) run.accuracy.push_back(*frame->accuracy);
    const int i = frame->frame_index;
    UserAction act = simulated_user_step(scenario.train.at(i - 1).annotation,
                                         frame->tracker.status, strategy, i);
    switch (act.kind) {
      case ActionKind::kNone: break;
      case ActionKind::kTagPositive:
        client.send(proto::TagMessage{frame->seq, proto::TagLabel::kPositive});
        break;
      case ActionKind::kTagNegative:
        client.send(proto::TagMessage{frame->seq, proto::TagLabel::kNegative});
        break;
      case ActionKind::kClick:
        client.send(proto::ClickMessage{frame->seq, act.click.x, act.click.y});
        break;
    }
    if (act.kind != ActionKind::kNone) ++run.interactions;
    client.send(proto::ControlMessage{proto::ControlAction::kStep});
  }
  return run;
}

/// Server on an ephemeral loopback port, served from a background thread.
class ServerThread {
 public:
  explicit ServerThread(station::Station& st)
      : server_(st, station::ServerOptions{"127.0.0.1", 0, false}),
        thread_([this] { server_.run(); }) {}
  ~ServerThread() { stop(); }

  unsigned short port() const { return server_.port(); }
  void stop() {
    if (!thread_.joinable()) return;
    server_.stop();
    thread_.join();
  }

 private:
  station::Server server_;
  std::thread thread_;
};

}  // namespace toot::testing

#endif  // TOOT_TESTS_LOOPBACK_HPP
