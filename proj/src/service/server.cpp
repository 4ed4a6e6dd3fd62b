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


#include "server.hpp"

#include <chrono>
#include <cmath>
#include <csignal>
#include <deque>
#include <optional>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "error.hpp"

namespace toot::station {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using Clock = std::chrono::steady_clock;

class Connection;

struct Server::Impl {
  Impl(Station& s, ServerOptions o);

  void do_accept();
  void shutdown();
  void closed(Connection* c);

  Station& station;
  ServerOptions options;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::optional<net::signal_set> signals;
  net::steady_timer grace{ioc};
  std::shared_ptr<Connection> active;
  bool stopping = false;
};

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Server::Impl& owner, bool reject)
      : ws_(std::move(socket)), owner_(owner), timer_(owner.ioc), reject_(reject) {}

  void start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  /// Graceful close with `code`; pending writes go out first.
  void close(websocket::close_code code, std::string reason) {
    if (closing_) return;
    closing_ = true;
    timer_.cancel();
    // Close frames carry at most 123 bytes of reason text.
    if (reason.size() > 123) reason.resize(123);
    close_reason_ = websocket::close_reason(code, reason);
    if (!writing_) do_close();
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return finish();
    if (reject_) return close(websocket::close_code::try_again_later, "operator session busy");
    send(owner_.station.hello());
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_read(ec);
    });
  }

  void on_read(beast::error_code ec) {
    if (ec) return finish();
    if (closing_) return;
    if (!ws_.got_text()) {
      buffer_.consume(buffer_.size());
      return close(websocket::close_code::protocol_error, "binary messages are not supported");
    }
    std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    std::optional<proto::UpMessage> msg;
    try {
      msg = proto::decode_up(text);
    } catch (const Error& e) {
      return close(websocket::close_code::protocol_error, e.what());
    }
    dispatch(*msg);
    do_read();
  }

  void dispatch(const proto::UpMessage& msg) {
    Station& st = owner_.station;
    const bool was_running = st.running();
    run_guarded([&] { return st.handle(msg); });
    if (st.config().pacing != Pacing::kPaced) return;
    if (st.running() && !was_running) start_pacing();
    if (!st.running()) timer_.cancel();
  }

  template <class F>
  void run_guarded(F&& f) {
    try {
      for (const proto::DownMessage& m : f()) send(m);
    } catch (const Error& e) {
      send(proto::ErrorMessage{to_string(e.kind()), e.what(), std::nullopt});
    }
  }

  void start_pacing() {
    anchor_ = Clock::now();
    ticks_ = 0;
    schedule();
  }

  Clock::duration period() const {
    return std::chrono::duration_cast<Clock::duration>(
        std::chrono::duration<double>(1.0 / owner_.station.config().fps));
  }

  void schedule() {
    timer_.expires_at(anchor_ + period() * (ticks_ + 1));
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) { self->on_tick(ec); });
  }

  void on_tick(beast::error_code ec) {
    Station& st = owner_.station;
    if (ec || closing_ || !st.running()) return;
    // Ticks that passed while the previous round was training are dropped.
    const auto elapsed = Clock::now() - anchor_;
    const long long due = std::max<long long>(ticks_ + 1, elapsed / period());
    const int skip = int(due - ticks_ - 1);
    ticks_ = due;
    run_guarded([&] { return st.advance(skip); });
    if (st.running()) schedule();
  }

  void send(const proto::DownMessage& msg) {
    if (closing_) return;
    outbox_.push_back(proto::encode(msg));
    if (!writing_) write_next();
  }

  void write_next() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      self->on_write(ec);
                    });
  }

  void on_write(beast::error_code ec) {
    writing_ = false;
    if (ec) return finish();
    outbox_.pop_front();
    if (closing_) {
      outbox_.clear();
      return do_close();
    }
    if (!outbox_.empty()) write_next();
  }

  void do_close() {
    ws_.async_close(close_reason_,
                    [self = shared_from_this()](beast::error_code) { self->finish(); });
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    timer_.cancel();
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().close(ignored);
    owner_.closed(this);
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& owner_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  net::steady_timer timer_;
  Clock::time_point anchor_;
  long long ticks_ = 0;
  websocket::close_reason close_reason_;
  bool reject_ = false;
  bool writing_ = false;
  bool closing_ = false;
  bool finished_ = false;
};

Server::Impl::Impl(Station& s, ServerOptions o) : station(s), options(std::move(o)) {
  beast::error_code ec;
  net::ip::address addr = net::ip::make_address(options.address, ec);
  if (ec) fail(ErrorKind::kConfig, "invalid bind address '" + options.address + "'");
  tcp::endpoint endpoint(addr, options.port);
  const std::string where = options.address + ":" + std::to_string(options.port);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) fail(ErrorKind::kIo, "cannot listen on " + where + ": " + ec.message());
  if (options.handle_signals) {
    signals.emplace(ioc, SIGINT, SIGTERM);
    signals->async_wait([this](beast::error_code e, int) {
      if (!e) shutdown();
    });
  }
}

void Server::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    auto conn = std::make_shared<Connection>(std::move(socket), *this, bool(active));
    if (!active) active = conn;
    conn->start();
    if (!stopping) do_accept();
  });
}

void Server::Impl::closed(Connection* c) {
  if (active.get() != c) return;
  active.reset();
  if (stopping) return ioc.stop();
  // A lost operator pauses the stream; the next one resumes with "start".
  station.handle(proto::ControlMessage{proto::ControlAction::kPause});
}

void Server::Impl::shutdown() {
  if (stopping) return;
  stopping = true;
  beast::error_code ignored;
  acceptor.close(ignored);
  if (signals) signals->cancel(ignored);
  if (active) active->close(websocket::close_code::going_away, "server shutting down");
  grace.expires_after(std::chrono::seconds(2));
  grace.async_wait([this](beast::error_code) { ioc.stop(); });
  if (!active) ioc.stop();
}

Server::Server(Station& station, ServerOptions options)
    : impl_(std::make_unique<Impl>(station, std::move(options))) {}

Server::~Server() = default;

std::string Server::address() const {
  beast::error_code ec;
  auto ep = impl_->acceptor.local_endpoint(ec);
  return ec ? impl_->options.address : ep.address().to_string();
}

unsigned short Server::port() const {
  beast::error_code ec;
  auto ep = impl_->acceptor.local_endpoint(ec);
  return ec ? impl_->options.port : ep.port();
}

void Server::run() {
  impl_->do_accept();
  impl_->ioc.run();
}

void Server::stop() {
  net::post(impl_->ioc, [this] { impl_->shutdown(); });
}

}  // namespace toot::station
