#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

namespace metasim::teleop {

/// Minimal WebSocket client for the teleop endpoint. Frames are received on
/// a background thread and buffered until read.
class TeleopClient {
 public:
  TeleopClient();
  ~TeleopClient();
  TeleopClient(const TeleopClient&) = delete;
  TeleopClient& operator=(const TeleopClient&) = delete;

  /// Throws Io when the connection or handshake fails.
  void connect(const std::string& host, unsigned short port, const std::string& target = "/teleop");
  void send(const std::string& frame);
  /// Next frame, or nullopt when none arrives within `timeout`.
  std::optional<std::string> receive(std::chrono::milliseconds timeout);
  /// Next frame whose first word is `kind`, skipping others.
  std::optional<std::string> receive_kind(const std::string& kind, std::chrono::milliseconds timeout);
  /// Graceful close; a dropped connection if `abrupt`.
  void close(bool abrupt = false);
  bool open() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Body of a plain HTTP GET. Throws Io on failure or a non-200 status.
std::string http_get(const std::string& host, unsigned short port, const std::string& target);

}  // namespace metasim::teleop
