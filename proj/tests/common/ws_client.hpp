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


// Blocking WebSocket client for exercising the station server in tests.

#ifndef TOOT_TESTS_WS_CLIENT_HPP
#define TOOT_TESTS_WS_CLIENT_HPP

#include <optional>
#include <string>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "protocol.hpp"

namespace toot::testing {

class WsClient {
 public:
  WsClient(const std::string& host, unsigned short port) : ws_(ioc_) {
    namespace net = boost::asio;
    net::ip::tcp::resolver resolver(ioc_);
    auto results = resolver.resolve(host, std::to_string(port));
    net::connect(ws_.next_layer(), results.begin(), results.end());
    ws_.handshake(host + ":" + std::to_string(port), "/");
    ws_.text(true);
  }

  ~WsClient() { close(); }

  void send(const proto::UpMessage& msg) { send_raw(proto::encode(msg)); }
  void send_raw(const std::string& text) { ws_.write(boost::asio::buffer(text)); }

  /// Raw text of the next message; nothing once the server has closed.
  std::optional<std::string> recv_raw() {
    boost::beast::flat_buffer buffer;
    boost::beast::error_code ec;
    ws_.read(buffer, ec);
    if (ec) {
      closed_ = true;
      return std::nullopt;
    }
    return boost::beast::buffers_to_string(buffer.data());
  }

  std::optional<proto::DownMessage> recv() {
    auto text = recv_raw();
    if (!text) return std::nullopt;
    return proto::decode_down(*text);
  }

  /// Close frame sent by the server, once recv has reported the close.
  boost::beast::websocket::close_reason close_reason() const { return ws_.reason(); }

  void close() {
    if (closed_) return;
    closed_ = true;
    boost::beast::error_code ec;
    ws_.close(boost::beast::websocket::close_code::normal, ec);
  }

 private:
  boost::asio::io_context ioc_;
  boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
  bool closed_ = false;
};

}  // namespace toot::testing

#endif  // TOOT_TESTS_WS_CLIENT_HPP
