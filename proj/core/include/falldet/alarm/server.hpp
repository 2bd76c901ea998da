#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "falldet/alarm/event_log.hpp"
#include "falldet/alarm/protocol.hpp"
#include "falldet/har/policy.hpp"

namespace falldet::alarm {

enum class ServerMode {
  kPolicyInServer,  // sensors stream predictions, the server debounces
  kPassthrough,     // sensors send fall_alarm themselves
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks an ephemeral port
  ServerMode mode = ServerMode::kPolicyInServer;
  har::DecisionPolicy policy{};    // fall_class is unused on the wire
  std::string fall_label = "fall"; // prediction class that counts as a fall
  int retry_ms = 500;
  int heartbeat_ms = 5000;
  int heartbeat_misses = 3;
  std::filesystem::path log_path;  // JSON lines, appended; empty = memory only

  void validate() const;
};

/// "host:port" -> (host, port). Throws ConfigError.
std::pair<std::string, std::uint16_t> parse_bind(const std::string& s);

struct SubscriberRecord {
  std::uint64_t connection_id = 0;
  Role role = Role::kObserver;
  std::string source_id;
  std::int64_t last_ack = 0;  // responders only
  std::int64_t connected_at_ms = 0;
};

struct ServerStats {
  std::size_t connections = 0;  // accepted over the lifetime
  std::size_t alarms = 0;
  std::size_t deliveries = 0;   // includes retries
  std::size_t acks = 0;
  std::size_t errors = 0;       // connections closed for protocol errors
};

/// NDJSON alarm hub. All protocol work happens on one internal thread,
/// which is also the single event-id sequencer.
///
/// Delivery to a responder is stop-and-wait per responder id: the oldest
/// unacked alarm is (re)sent every retry_ms and the next one only after
/// it is acked, so a connection never sees ids go backwards. Pending
/// alarms survive disconnects and go out again when a responder with the
/// same source_id says hello.
class AlarmServer {
 public:
  explicit AlarmServer(ServerConfig cfg);
  ~AlarmServer();
  AlarmServer(const AlarmServer&) = delete;
  AlarmServer& operator=(const AlarmServer&) = delete;

  /// Binds and starts the service thread. Throws NetworkError.
  void start();
  void stop();
  bool running() const;
  std::uint16_t port() const;

  std::vector<LogRecord> log() const;
  ServerStats stats() const;
  std::vector<SubscriberRecord> subscribers() const;
  /// Unacked alarm ids per known responder id.
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> pending() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace falldet::alarm
