#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "falldet/alarm/protocol.hpp"

namespace falldet::alarm {

/// Blocking NDJSON client. Heartbeats from the server are answered inside
/// receive() and not returned unless auto_heartbeat is off.
class AlarmClient {
 public:
  AlarmClient() = default;
  ~AlarmClient();
  AlarmClient(AlarmClient&& other) noexcept;
  AlarmClient& operator=(AlarmClient&& other) noexcept;
  AlarmClient(const AlarmClient&) = delete;
  AlarmClient& operator=(const AlarmClient&) = delete;

  /// Throws NetworkError when the connection cannot be made.
  static AlarmClient connect(const std::string& host, std::uint16_t port, int timeout_ms = 2000);

  void send(const Message& m);
  void hello(Role role, const std::string& source_id) { send(Message::hello(role, source_id)); }
  /// Sends raw bytes as-is (fault-injection tests).
  void send_raw(const std::string& bytes);

  /// Next message, or nullopt after timeout_ms. Throws NetworkError when
  /// the peer has closed and nothing is buffered, ParseError on a bad line.
  std::optional<Message> receive(int timeout_ms);

  void close();
  bool is_open() const noexcept { return fd_ >= 0; }
  void set_auto_heartbeat(bool on) noexcept { auto_heartbeat_ = on; }

 private:
  explicit AlarmClient(int fd) : fd_(fd) {}
  std::optional<std::string> pop_line();

  int fd_ = -1;
  std::string in_;
  bool eof_ = false;
  bool auto_heartbeat_ = true;
};

}  // namespace falldet::alarm
