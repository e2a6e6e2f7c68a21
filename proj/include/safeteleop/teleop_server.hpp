#pragma once

#include <memory>

#include "safeteleop/teleop_session.hpp"

namespace safeteleop {

struct ServeOptions {
  unsigned short port = 8080;  // 0 picks an ephemeral port
  double tick_hz = 6.0;
  double slice_hz = 2.0;
  SessionOptions session;
};

/// Live service around a TeleopSession: a wall-clock tick loop plus a network
/// thread serving the websocket endpoint /ws and GET /scene. The two share
/// only an inbound message mailbox and an outbound broadcast queue.
class TeleopServer {
 public:
  /// Binds immediately; throws std::runtime_error when the port is taken.
  TeleopServer(Scenario scenario, ServeOptions options);
  ~TeleopServer();

  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  unsigned short port() const;

  /// Starts the tick loop and network thread and returns.
  void start();
  /// Blocks until stop() is called (from another thread or a signal handler).
  void wait();
  void stop();

  /// Copy of the session log as of the last completed tick.
  TrialLog session_record() const;
  std::int64_t ticks() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace safeteleop
