#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace falldet::alarm {

enum class MessageType { kHello, kPrediction, kFallAlarm, kAck, kHeartbeat, kError };
enum class Role { kSensor, kResponder, kObserver };

std::string_view to_string(MessageType t) noexcept;
std::string_view to_string(Role r) noexcept;
/// Throws ParseError on an unknown role name.
Role parse_role(std::string_view s);

/// One wire message. Only the fields of its type are meaningful; encode()
/// writes exactly those.
struct Message {
  MessageType type = MessageType::kHeartbeat;
  Role role = Role::kObserver;  // hello
  std::string source_id;        // hello, fall_alarm
  std::int64_t window_id = 0;   // prediction
  std::string class_name;       // prediction
  double confidence = 0.0;      // prediction, fall_alarm
  std::int64_t ts_ms = 0;       // prediction, fall_alarm, heartbeat
  std::int64_t event_id = 0;    // fall_alarm, ack
  std::string reason;           // error

  static Message hello(Role role, std::string source_id);
  static Message prediction(std::int64_t window_id, std::string class_name, double confidence, std::int64_t ts_ms);
  static Message fall_alarm(std::int64_t event_id, std::int64_t ts_ms, double confidence, std::string source_id);
  static Message ack(std::int64_t event_id);
  static Message heartbeat(std::int64_t ts_ms);
  static Message error(std::string reason);

  bool operator==(const Message&) const = default;
};

/// One JSON object, no trailing newline.
std::string encode(const Message& m);
/// Parses one line (a trailing '\r' is tolerated). Throws ParseError on
/// invalid JSON, unknown type, or missing/mistyped fields.
Message decode(std::string_view line);

/// Upper bound on one encoded line; longer input is a protocol error.
inline constexpr std::size_t kMaxLineBytes = 64 * 1024;

/// Milliseconds since the Unix epoch.
std::int64_t now_ms();

}  // namespace falldet::alarm
