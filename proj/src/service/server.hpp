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


// WebSocket transport for a Station: one operator connection at a time,
// everything on a single-threaded I/O context so that receiving, training
// and sending never overlap.

#ifndef TOOT_SERVICE_SERVER_HPP
#define TOOT_SERVICE_SERVER_HPP

#include <functional>
#include <memory>
#include <string>

#include "station.hpp"

namespace toot::station {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  bool handle_signals = false; // stop on SIGINT / SIGTERM
};

class Server {
 public:
  /// Binds immediately; an unusable address or busy port raises Error(kIo).
  Server(Station& station, ServerOptions options);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::string address() const;
  unsigned short port() const;

  /// Serves until stop() or a handled signal.
  void run();
  /// Safe to call from any thread.
  void stop();

 private:
  friend class Connection;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace toot::station

#endif  // TOOT_SERVICE_SERVER_HPP
