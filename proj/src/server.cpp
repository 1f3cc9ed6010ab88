#include "droneview/server.hpp"

#include <chrono>
#include <deque>
#include <iostream>
#include <set>
#include <stdexcept>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "droneview/protocol.hpp"

namespace droneview {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

// Snapshots queued beyond this are dropped for a slow client; acks never are.
constexpr std::size_t kMaxQueuedSnapshots = 8;

class Client;

}  // namespace

struct Server::Impl {
  Impl(SessionConfig config, ServerOptions opts);

  void accept();
  void schedule_tick();
  void on_tick();
  std::string scene_text() const { return scene_message(config.scene).dump(); }

  SessionConfig config;
  ServerOptions options;
  std::string digest;
  asio::io_context ioc;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  asio::signal_set signals;
  Session session;
  SnapshotThrottle throttle;
  std::set<std::shared_ptr<Client>> clients;
  std::chrono::steady_clock::time_point next_tick;
};

namespace {

class Client : public std::enable_shared_from_this<Client> {
 public:
  Client(tcp::socket socket, Server::Impl& server) : ws_(std::move(socket)), server_(server) {}

  void start() {
    ws_.text(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      self->server_.clients.insert(self);
      self->send(self->server_.scene_text(), false);
      self->read();
    });
  }

  void send(std::string text, bool droppable) {
    if (closed_) return;
    if (droppable) {
      std::size_t queued_snapshots = 0;
      for (const auto& m : queue_) queued_snapshots += m.droppable;
      if (queued_snapshots >= kMaxQueuedSnapshots) return;
    }
    queue_.push_back({std::move(text), droppable});
    if (queue_.size() == 1) write();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    server_.clients.erase(shared_from_this());
  }

 private:
  struct Outgoing {
    std::string text;
    bool droppable;
  };

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->send(handle_client_message(self->server_.session, text).dump(), false);
      self->read();
    });
  }

  void write() {
    ws_.async_write(asio::buffer(queue_.front().text), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write();
    });
  }

  websocket::stream<tcp::socket> ws_;
  Server::Impl& server_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> queue_;
  bool closed_{false};
};

}  // namespace

Server::Impl::Impl(SessionConfig cfg, ServerOptions opts)
    : config(std::move(cfg)),
      options(std::move(opts)),
      digest(scene_digest(config.scene)),
      acceptor(ioc),
      timer(ioc),
      signals(ioc),
      session(config, nullptr),
      throttle(options.snapshot_hz) {
  if (!(options.realtime_factor > 0.0)) throw std::invalid_argument("realtime_factor: must be > 0");
  if (options.snapshot_hz > kMaxSnapshotHz) throw std::invalid_argument("snapshot_hz: must be <= 20");
  const tcp::endpoint ep(asio::ip::make_address(options.address), options.port);
  acceptor.open(ep.protocol());
  acceptor.set_option(asio::socket_base::reuse_address(true));
  acceptor.bind(ep);
  acceptor.listen();
}

void Server::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<Client>(std::move(socket), *this)->start();
    accept();
  });
}

void Server::Impl::schedule_tick() {
  const auto period = std::chrono::duration<double>(1.0 / (config.local_hz * options.realtime_factor));
  next_tick += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
  timer.expires_at(next_tick);
  timer.async_wait([this](beast::error_code ec) {
    if (!ec) on_tick();
  });
}

void Server::Impl::on_tick() {
  session.step();
  if (!clients.empty() && throttle.due(session.time())) {
    const std::string text = snapshot_message(session.view(), session.snapshot(), digest).dump();
    for (const auto& c : std::set<std::shared_ptr<Client>>(clients)) c->send(text, true);
  }
  // Fall back to the wall clock when ticks overrun instead of bursting to catch up.
  if (std::chrono::steady_clock::now() > next_tick + std::chrono::milliseconds(100)) {
    next_tick = std::chrono::steady_clock::now();
  }
  schedule_tick();
}

Server::Server(SessionConfig config, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(options))) {}

Server::~Server() = default;

std::uint16_t Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
  impl_->accept();
  impl_->next_tick = std::chrono::steady_clock::now();
  impl_->schedule_tick();
  if (impl_->options.handle_signals) {
    impl_->signals.add(SIGINT);
    impl_->signals.add(SIGTERM);
    impl_->signals.async_wait([this](beast::error_code, int) { impl_->ioc.stop(); });
  }
  impl_->ioc.run();
}

void Server::stop() { impl_->ioc.stop(); }

}  // namespace droneview
