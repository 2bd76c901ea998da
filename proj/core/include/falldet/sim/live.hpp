#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "falldet/alarm/client.hpp"
#include "falldet/alarm/event_log.hpp"
#include "falldet/sim/trial.hpp"

namespace falldet::sim {

/// Responder side of the alarm protocol. Alarms are deduplicated by
/// event_id (delivery is at-least-once), and duplicates are re-acked so
/// the server stops retrying.
class LiveResponder {
 public:
  LiveResponder(std::string host, std::uint16_t port, std::string responder_id);

  void connect(int timeout_ms = 2000);
  void disconnect();
  bool connected() const noexcept { return client_.is_open(); }

  /// Next alarm not seen before, or nullopt after timeout_ms.
  std::optional<alarm::Message> next_alarm(int timeout_ms);
  void ack(std::int64_t event_id);
  void set_auto_ack(bool on) noexcept { auto_ack_ = on; }

  std::size_t duplicates() const noexcept { return duplicates_; }
  const std::vector<std::int64_t>& received() const noexcept { return order_; }

 private:
  std::string host_;
  std::uint16_t port_;
  std::string id_;
  alarm::AlarmClient client_;
  bool auto_ack_ = true;
  std::set<std::int64_t> seen_;
  std::vector<std::int64_t> order_;
  std::size_t duplicates_ = 0;
};

struct LiveCampaignOptions {
  CampaignConfig campaign;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;        // 0 starts an in-process server on an ephemeral port
  int alarm_timeout_ms = 2000;   // wait for an expected alarm
  int miss_grace_ms = 300;       // confirm silence on a missed trial
  bool inject_disconnect = false;  // drop the responder before its first ack, then reconnect
  std::filesystem::path server_log;  // in-process server only
};

struct LiveCampaignResult {
  CampaignReport report;               // deterministic part
  std::vector<double> wall_latency_ms; // last prediction sent -> alarm received
  std::size_t duplicate_alarms = 0;
  alarm::LatencyReport service_latency;  // in-process server only
};

/// Runs sensor, alarm service and responder over loopback. Receipt times
/// enter the simulator clock at the next tick, so the report is identical
/// across runs as long as every hop is faster than one tick.
LiveCampaignResult run_live_campaign(const GridMap& map, const LiveCampaignOptions& opts);

}  // namespace falldet::sim
