#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "metasim/teleop/session.hpp"

namespace metasim::teleop {

/// 8571 unless METASIM_TELEOP_PORT holds a valid port number.
unsigned short default_port();

struct ServerOptions {
  std::string address = "127.0.0.1";
  /// 0 binds an ephemeral port (see TeleopServer::port).
  unsigned short port = 8571;
  /// Directory whose index.html is served at "/"; a built-in page otherwise.
  std::filesystem::path web_root;
  /// RVT1 file written when the session closes.
  std::optional<std::filesystem::path> record;
  SessionOptions session;
};

struct ServerStats {
  std::uint64_t received = 0;
  std::uint64_t applied = 0;
  std::uint64_t stale = 0;
  std::uint64_t malformed = 0;
  std::uint64_t coalesced = 0;
  std::size_t max_queue = 0;
  /// Largest delay between a command's arrival and its application.
  double max_latency_ms = 0.0;
};

/// One teleoperation session served over WebSocket at /teleop, plus the
/// operator page at /. Network I/O runs on one thread and env stepping on
/// another; they share only the bounded command queue. At most one command
/// is applied per 1/rate slot; each one steps the env and sends a STATE
/// frame back.
class TeleopServer {
 public:
  TeleopServer(env::Env& env, ServerOptions opts);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts both threads. Throws Io when the port is unavailable.
  void start();
  unsigned short port() const;
  const std::string& token() const;

  /// Blocks until the session has closed (client BYE or stop()) and returns
  /// the recorded trajectory; nullopt if `timeout` expires first.
  std::optional<state::Trajectory> wait(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
  /// Closes the session after applying what is queued, then shuts down.
  void stop();

  ServerStats stats() const;
  SessionStatus status() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// The built-in operator page.
const std::string& builtin_index_page();

}  // namespace metasim::teleop
