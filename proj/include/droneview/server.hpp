#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "droneview/session.hpp"

namespace droneview {

struct ServerOptions {
  std::string address{"127.0.0.1"};
  std::uint16_t port{8765};  // 0 picks a free port
  double snapshot_hz{20.0};
  /// Simulated seconds per wall-clock second.
  double realtime_factor{1.0};
  /// Stop on SIGINT or SIGTERM.
  bool handle_signals{false};
};

/// Interactive WebSocket front end for one Session. The simulation, the
/// clients and all command handling share a single I/O thread, so the session
/// is never touched concurrently.
class Server {
 public:
  Server(SessionConfig config, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Bound port; valid right after construction.
  std::uint16_t port() const;
  /// Serves until stop() is called.
  void run();
  /// Thread-safe.
  void stop();

  struct Impl;  // opaque

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace droneview
