#include "falldet/sim/live.hpp"

#include <chrono>
#include <memory>
#include <thread>

#include "falldet/alarm/server.hpp"
#include "falldet/error.hpp"

namespace falldet::sim {

using alarm::Message;
using alarm::MessageType;

LiveResponder::LiveResponder(std::string host, std::uint16_t port, std::string responder_id)
    : host_(std::move(host)), port_(port), id_(std::move(responder_id)) {}

void LiveResponder::connect(int timeout_ms) {
  client_ = alarm::AlarmClient::connect(host_, port_, timeout_ms);
  client_.hello(alarm::Role::kResponder, id_);
}

void LiveResponder::disconnect() { client_.close(); }

void LiveResponder::ack(std::int64_t event_id) { client_.send(Message::ack(event_id)); }

std::optional<Message> LiveResponder::next_alarm(int timeout_ms) {
  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    if (left <= 0) return std::nullopt;
    auto m = client_.receive(static_cast<int>(left));
    if (!m) return std::nullopt;
    if (m->type == MessageType::kError) throw NetworkError("alarm service error: " + m->reason);
    if (m->type != MessageType::kFallAlarm) continue;
    if (!seen_.insert(m->event_id).second) {
      ++duplicates_;
      ack(m->event_id);
      continue;
    }
    if (auto_ack_) ack(m->event_id);
    order_.push_back(m->event_id);
    return m;
  }
}

LiveCampaignResult run_live_campaign(const GridMap& map, const LiveCampaignOptions& opts) {
  const CampaignConfig& cfg = opts.campaign;
  cfg.validate();
  const TimingConfig& timing = cfg.timing;

  std::unique_ptr<alarm::AlarmServer> server;
  std::uint16_t port = opts.port;
  if (port == 0) {
    alarm::ServerConfig sc;
    sc.host = opts.host;
    sc.policy.confidence_threshold = 0.8;
    sc.policy.consecutive_k = timing.consecutive_k;
    sc.log_path = opts.server_log;
    server = std::make_unique<alarm::AlarmServer>(sc);
    server->start();
    port = server->port();
  }

  LiveResponder responder(opts.host, port, "robot-1");
  responder.connect();
  auto sensor = alarm::AlarmClient::connect(opts.host, port);
  sensor.hello(alarm::Role::kSensor, "csi-sensor-1");
  // Both hellos must be registered before the first alarm fans out.
  if (server) {
    const auto until = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    while (server->subscribers().size() < 2) {
      if (std::chrono::steady_clock::now() > until) throw NetworkError("clients did not register with the service");
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  } else {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }

  using Clock = std::chrono::steady_clock;
  LiveCampaignResult result;
  std::vector<TrialReport> reports;
  std::int64_t window_id = 0;
  bool fault_pending = opts.inject_disconnect;

  auto predict = [&](const std::string& cls, double conf) {
    sensor.send(Message::prediction(window_id++, cls, conf, alarm::now_ms()));
  };

  for (const TrialPlan& p : plan_campaign(cfg)) {
    // Quiet windows before the fall, then k windows covering it.
    predict("normal", 0.9);
    predict("normal", 0.9);
    Clock::time_point sent;
    for (std::size_t i = 0; i < timing.consecutive_k; ++i) {
      sent = Clock::now();
      predict(p.detection_class, p.detected ? 0.95 : 0.9);
    }

    TrialEvents ev{p.trial_id, p.fall_time_s, p.detection_class, {}};
    const double detected_at = detection_time(timing, p.fall_time_s);
    const bool inject = fault_pending && p.detected;
    if (inject) responder.set_auto_ack(false);
    const auto got = responder.next_alarm(p.detected ? opts.alarm_timeout_ms : opts.miss_grace_ms);
    if (got) {
      const double wall_s = std::chrono::duration<double>(Clock::now() - sent).count();
      result.wall_latency_ms.push_back(wall_s * 1000.0);
      ev.alarm_times_s.push_back(detected_at + wall_s);
    }
    if (inject && got) {
      // Drop before acking; the server must deliver the same alarm again.
      fault_pending = false;
      responder.disconnect();
      responder.set_auto_ack(true);
      responder.connect();
      const std::size_t before = responder.duplicates();
      const auto until = Clock::now() + std::chrono::milliseconds(opts.alarm_timeout_ms);
      while (responder.duplicates() == before) {
        if (Clock::now() > until) throw NetworkError("alarm was not re-delivered after reconnect");
        if (responder.next_alarm(20)) throw NetworkError("unexpected new alarm during redelivery");
      }
      // The trial sees the duplicate too; it must not change the outcome.
      ev.alarm_times_s.push_back(detected_at + std::chrono::duration<double>(Clock::now() - sent).count());
    }
    predict("normal", 0.9);  // re-arm the debounce
    reports.push_back(run_trial(map, timing, ev));
  }

  result.duplicate_alarms = responder.duplicates();
  result.report = summarize(std::move(reports));
  sensor.close();
  responder.disconnect();
  if (server) {
    server->stop();
    const auto log = server->log();
    result.service_latency = alarm::record_latency(log);
  }
  return result;
}

}  // namespace falldet::sim
