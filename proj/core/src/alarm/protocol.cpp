#include "falldet/alarm/protocol.hpp"

#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "falldet/error.hpp"

namespace falldet::alarm {

using json = nlohmann::json;

std::string_view to_string(MessageType t) noexcept {
  switch (t) {
    case MessageType::kHello: return "hello";
    case MessageType::kPrediction: return "prediction";
    case MessageType::kFallAlarm: return "fall_alarm";
    case MessageType::kAck: return "ack";
    case MessageType::kHeartbeat: return "heartbeat";
    case MessageType::kError: return "error";
  }
  return "?";
}

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::kSensor: return "sensor";
    case Role::kResponder: return "responder";
    case Role::kObserver: return "observer";
  }
  return "?";
}

Role parse_role(std::string_view s) {
  if (s == "sensor") return Role::kSensor;
  if (s == "responder") return Role::kResponder;
  if (s == "observer") return Role::kObserver;
  throw ParseError("unknown role '" + std::string(s) + "'");
}

Message Message::hello(Role role, std::string source_id) {
  Message m;
  m.type = MessageType::kHello;
  m.role = role;
  m.source_id = std::move(source_id);
  return m;
}

Message Message::prediction(std::int64_t window_id, std::string class_name, double confidence, std::int64_t ts_ms) {
  Message m;
  m.type = MessageType::kPrediction;
  m.window_id = window_id;
  m.class_name = std::move(class_name);
  m.confidence = confidence;
  m.ts_ms = ts_ms;
  return m;
}

Message Message::fall_alarm(std::int64_t event_id, std::int64_t ts_ms, double confidence, std::string source_id) {
  Message m;
  m.type = MessageType::kFallAlarm;
  m.event_id = event_id;
  m.ts_ms = ts_ms;
  m.confidence = confidence;
  m.source_id = std::move(source_id);
  return m;
}

Message Message::ack(std::int64_t event_id) {
  Message m;
  m.type = MessageType::kAck;
  m.event_id = event_id;
  return m;
}

Message Message::heartbeat(std::int64_t ts_ms) {
  Message m;
  m.type = MessageType::kHeartbeat;
  m.ts_ms = ts_ms;
  return m;
}

Message Message::error(std::string reason) {
  Message m;
  m.type = MessageType::kError;
  m.reason = std::move(reason);
  return m;
}

std::string encode(const Message& m) {
  json j;
  j["type"] = to_string(m.type);
  switch (m.type) {
    case MessageType::kHello:
      j["role"] = to_string(m.role);
      j["source_id"] = m.source_id;
      break;
    case MessageType::kPrediction:
      j["window_id"] = m.window_id;
      j["class"] = m.class_name;
      j["confidence"] = m.confidence;
      j["ts_ms"] = m.ts_ms;
      break;
    case MessageType::kFallAlarm:
      j["event_id"] = m.event_id;
      j["ts_ms"] = m.ts_ms;
      j["confidence"] = m.confidence;
      j["source_id"] = m.source_id;
      break;
    case MessageType::kAck:
      j["event_id"] = m.event_id;
      break;
    case MessageType::kHeartbeat:
      j["ts_ms"] = m.ts_ms;
      break;
    case MessageType::kError:
      j["reason"] = m.reason;
      break;
  }
  return j.dump();
}

namespace {

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

std::int64_t int_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) throw ParseError(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

double number_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(std::string("field '") + key + "' must be finite");
  return d;
}

std::string string_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) throw ParseError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

Message decode(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.size() > kMaxLineBytes) throw ParseError("message too long");
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("message must be a JSON object");
  const std::string type = string_field(j, "type");

  Message m;
  if (type == "hello") {
    m.type = MessageType::kHello;
    m.role = parse_role(string_field(j, "role"));
    m.source_id = string_field(j, "source_id");
  } else if (type == "prediction") {
    m.type = MessageType::kPrediction;
    m.window_id = int_field(j, "window_id");
    m.class_name = string_field(j, "class");
    m.confidence = number_field(j, "confidence");
    m.ts_ms = int_field(j, "ts_ms");
  } else if (type == "fall_alarm") {
    m.type = MessageType::kFallAlarm;
    m.event_id = int_field(j, "event_id");
    m.ts_ms = int_field(j, "ts_ms");
    m.confidence = number_field(j, "confidence");
    m.source_id = string_field(j, "source_id");
  } else if (type == "ack") {
    m.type = MessageType::kAck;
    m.event_id = int_field(j, "event_id");
  } else if (type == "heartbeat") {
    m.type = MessageType::kHeartbeat;
    m.ts_ms = int_field(j, "ts_ms");
  } else if (type == "error") {
    m.type = MessageType::kError;
    m.reason = string_field(j, "reason");
  } else {
    throw ParseError("unknown message type '" + type + "'");
  }
  if ((m.type == MessageType::kPrediction || m.type == MessageType::kFallAlarm) &&
      (m.confidence < 0.0 || m.confidence > 1.0)) {
    throw ParseError("confidence must lie in [0, 1]");
  }
  return m;
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace falldet::alarm
