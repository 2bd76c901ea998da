#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace falldet::alarm {

/// One line of the service's append-only JSON-lines log.
///   detection  episode completed; ts_ms is the sensor's timestamp of the
///              completing prediction, event_id the alarm it produced
///   fall_alarm alarm created (server clock)
///   deliver    alarm written to a responder (peer = responder id)
///   ack        ack received (peer = responder id)
///   connect / disconnect / prediction / error  bookkeeping
struct LogRecord {
  std::string event;
  std::int64_t ts_ms = 0;
  std::optional<std::int64_t> event_id;
  std::string source_id;
  std::string peer;
  std::string detail;

  bool operator==(const LogRecord&) const = default;
};

std::string to_json_line(const LogRecord& r);
LogRecord parse_log_line(const std::string& line);
/// Throws ParseError naming the file and line.
std::vector<LogRecord> read_event_log(const std::filesystem::path& path);

struct AlarmLatency {
  std::int64_t event_id = 0;
  std::optional<double> detection_to_alarm_ms;
  std::optional<double> alarm_to_ack_ms;  // earliest ack of this alarm
  bool matched = false;                   // both segments present
};

struct LatencyStats {
  std::size_t count = 0;
  double mean_ms = 0.0;
  double max_ms = 0.0;
};

struct LatencyReport {
  std::vector<AlarmLatency> alarms;  // ordered by event_id
  LatencyStats detection_to_alarm;   // matched alarms only
  LatencyStats alarm_to_ack;
  std::size_t unmatched = 0;
};

/// Pairs each fall_alarm with its detection and first ack by event_id.
/// Alarms missing either side are flagged and left out of the aggregates.
LatencyReport record_latency(std::span<const LogRecord> log);

std::string to_json(const LatencyReport& r);

}  // namespace falldet::alarm
