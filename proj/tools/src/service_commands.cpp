#include <csignal>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "cli.hpp"
#include "falldet/alarm/server.hpp"
#include "falldet/error.hpp"
#include "falldet/sim/live.hpp"
#include "falldet/sim/trial.hpp"

namespace falldet::cli {

namespace {

struct ServeArgs {
  std::string bind = "127.0.0.1:7878";
  double threshold = 0.8;
  std::size_t k = 3;
  int retry_ms = 500;
  int heartbeat_ms = 5000;
  std::filesystem::path log;
  std::string mode = "policy";
  std::string fall_label = "fall";
  double duration_s = 0.0;
};

int run_serve(const Globals& g, const ServeArgs& a) {
  alarm::ServerConfig sc;
  std::tie(sc.host, sc.port) = alarm::parse_bind(a.bind);
  sc.mode = a.mode == "passthrough" ? alarm::ServerMode::kPassthrough : alarm::ServerMode::kPolicyInServer;
  sc.policy.confidence_threshold = a.threshold;
  sc.policy.consecutive_k = a.k;
  sc.fall_label = a.fall_label;
  sc.retry_ms = a.retry_ms;
  sc.heartbeat_ms = a.heartbeat_ms;
  sc.log_path = a.log;
  sc.validate();

  // Signals are taken synchronously so shutdown runs on this thread.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  alarm::AlarmServer server(sc);
  server.start();
  note(g, "listening on " + sc.host + ":" + std::to_string(server.port()));

  timespec slice{0, 200'000'000};
  const double deadline = a.duration_s;
  double waited = 0.0;
  while (deadline <= 0.0 || waited < deadline) {
    if (sigtimedwait(&set, nullptr, &slice) > 0) break;
    waited += 0.2;
  }
  server.stop();

  const auto s = server.stats();
  Json j;
  j["port"] = server.port();
  j["connections"] = s.connections;
  j["alarms"] = s.alarms;
  j["deliveries"] = s.deliveries;
  j["acks"] = s.acks;
  j["errors"] = s.errors;
  emit(g, j);
  return kOk;
}

struct CampaignArgs {
  std::filesystem::path map;
  std::size_t trials = 8;
  std::string schedule;
  double speed = 0.5;
  double door_time = 30.0;
  double window = 300.0;
  double period = 1.0;
  std::size_t k = 3;
  double latency = 0.01;
  double fall_min = 20.0;
  double fall_max = 120.0;
  // live only
  std::string connect;
  bool inject_disconnect = false;
  std::filesystem::path server_log;
  int alarm_timeout_ms = 2000;
  // trial only
  std::optional<double> fall_time;
  bool missed = false;
};

void add_timing_flags(CLI::App* cmd, CampaignArgs& a) {
  cmd->add_option("--map", a.map, "map file (default: bundled two-room map)");
  cmd->add_option("--speed", a.speed, "robot speed m/s")->capture_default_str();
  cmd->add_option("--door-time", a.door_time, "seconds per door traversal")->capture_default_str();
  cmd->add_option("--window", a.window, "trial window in seconds from the fall")->capture_default_str();
  cmd->add_option("--period", a.period, "prediction period in seconds")->capture_default_str();
  cmd->add_option("--k", a.k, "consecutive windows needed for an alarm")->capture_default_str();
}

void add_campaign_flags(CLI::App* cmd, CampaignArgs& a) {
  add_timing_flags(cmd, a);
  cmd->add_option("--trials", a.trials, "number of trials")->capture_default_str();
  cmd->add_option("--schedule", a.schedule, "detected trials, e.g. 7of8");
  cmd->add_option("--fall-min", a.fall_min, "earliest fall time s")->capture_default_str();
  cmd->add_option("--fall-max", a.fall_max, "latest fall time s")->capture_default_str();
}

void add_live_flags(CLI::App* cmd, CampaignArgs& a) {
  cmd->add_option("--connect", a.connect, "use a running service at host:port instead of an in-process one");
  cmd->add_flag("--inject-disconnect", a.inject_disconnect, "drop the responder before its first ack");
  cmd->add_option("--server-log", a.server_log, "event log of the in-process service (JSON lines)");
  cmd->add_option("--alarm-timeout-ms", a.alarm_timeout_ms, "wait for an expected alarm")->capture_default_str();
}

sim::GridMap load_grid(const CampaignArgs& a) { return a.map.empty() ? sim::bundled_map() : sim::read_map_file(a.map); }

sim::CampaignConfig campaign_config(const Globals& g, const CampaignArgs& a) {
  sim::CampaignConfig c;
  c.n_trials = a.trials;
  if (!a.schedule.empty()) c.schedule = sim::parse_schedule(a.schedule);
  c.seed = g.seed_or(1);
  c.fall_time_min_s = a.fall_min;
  c.fall_time_max_s = a.fall_max;
  c.network_latency_s = a.latency;
  c.timing.speed_mps = a.speed;
  c.timing.door_time_s = a.door_time;
  c.timing.window_s = a.window;
  c.timing.prediction_period_s = a.period;
  c.timing.consecutive_k = a.k;
  c.validate();
  return c;
}

std::string report_text(const sim::CampaignReport& r) {
  std::ostringstream out;
  char line[200];
  for (const auto& t : r.trials) {
    std::snprintf(line, sizeof line, "trial %d  %-16s fall %6.1f s  alarm +%5.1f s  nav %6.1f s  door %5.1f s  total %6.1f s\n",
                  t.trial_id, to_string(t.outcome), t.fall_time_s, t.alarm_latency_s, t.nav_time_s, t.door_time_s,
                  t.total_response_s);
    out << line;
  }
  std::snprintf(line, sizeof line, "success rate %.3f  mean response %.1f s\n", r.success_rate, r.mean_response_s);
  out << line;
  return out.str();
}

void emit_report(const Globals& g, const sim::CampaignReport& r) {
  const std::string json = sim::to_json(r);
  const std::string csv = sim::to_csv(r);
  if (const auto dir = out_dir(g, false, "campaign"); !dir.empty()) {
    write_text(dir / "campaign.json", json);
    write_text(dir / "campaign.csv", csv);
  }
  emit(g, Json::parse(json), csv, report_text(r));
}

int run_live(const Globals& g, const CampaignArgs& a, sim::CampaignConfig cfg) {
  sim::LiveCampaignOptions opt;
  opt.campaign = std::move(cfg);
  opt.inject_disconnect = a.inject_disconnect;
  opt.server_log = a.server_log;
  opt.alarm_timeout_ms = a.alarm_timeout_ms;
  if (!a.connect.empty()) {
    std::tie(opt.host, opt.port) = alarm::parse_bind(a.connect);
    if (opt.port == 0) throw ConfigError("--connect needs a non-zero port");
  }
  const auto res = sim::run_live_campaign(load_grid(a), opt);

  // Wall-clock figures vary run to run, so they stay out of the campaign report.
  Json live;
  live["wall_latency_ms"] = res.wall_latency_ms;
  live["duplicate_alarms"] = res.duplicate_alarms;
  if (a.connect.empty()) live["service_latency"] = Json::parse(alarm::to_json(res.service_latency));
  if (const auto dir = out_dir(g, false, "e2e"); !dir.empty()) write_text(dir / "live.json", live.dump(2) + "\n");
  double worst = 0.0;
  for (double ms : res.wall_latency_ms) worst = std::max(worst, ms);
  note(g, "alarms received " + std::to_string(res.wall_latency_ms.size()) + ", duplicates " +
              std::to_string(res.duplicate_alarms) + ", worst latency " + std::to_string(worst) + " ms");
  emit_report(g, res.report);
  return kOk;
}

}  // namespace

void add_service_commands(CLI::App& app, Globals& g, Action& action) {
  auto sa = std::make_shared<ServeArgs>();
  auto* serve = app.add_subcommand("serve", "run the alarm service until SIGINT/SIGTERM");
  serve->add_option("--bind", sa->bind, "host:port (port 0 = ephemeral)")->capture_default_str();
  serve->add_option("--policy-threshold", sa->threshold, "fall confidence threshold")->capture_default_str();
  serve->add_option("--policy-k", sa->k, "consecutive confident windows")->capture_default_str();
  serve->add_option("--retry-ms", sa->retry_ms, "re-send interval for unacked alarms")->capture_default_str();
  serve->add_option("--heartbeat-ms", sa->heartbeat_ms, "heartbeat interval")->capture_default_str();
  serve->add_option("--log", sa->log, "JSON-lines event log");
  serve->add_option("--mode", sa->mode, "policy: debounce predictions; passthrough: sensors raise alarms")
      ->check(CLI::IsMember({"policy", "passthrough"}))
      ->capture_default_str();
  serve->add_option("--fall-label", sa->fall_label, "prediction class counted as a fall")->capture_default_str();
  serve->add_option("--duration", sa->duration_s, "stop after this many seconds (0 = run until signalled)");
  serve->callback([&g, &action, sa] { action = [&g, sa] { return run_serve(g, *sa); }; });

  auto ca = std::make_shared<CampaignArgs>();
  auto* simulate = app.add_subcommand("simulate", "offline responder campaign");
  add_campaign_flags(simulate, *ca);
  simulate->add_option("--latency", ca->latency, "detection-to-receipt delay s")->capture_default_str();
  simulate->callback([&g, &action, ca] {
    action = [&g, ca] {
      emit_report(g, sim::run_campaign(load_grid(*ca), campaign_config(g, *ca)));
      return kOk;
    };
  });

  auto ea = std::make_shared<CampaignArgs>();
  auto* e2e = app.add_subcommand("e2e", "sensor, alarm service and responder over loopback for a whole campaign");
  add_campaign_flags(e2e, *ea);
  add_live_flags(e2e, *ea);
  e2e->callback([&g, &action, ea] { action = [&g, ea] { return run_live(g, *ea, campaign_config(g, *ea)); }; });

  auto ta = std::make_shared<CampaignArgs>();
  auto* trial = app.add_subcommand("trial", "one live trial");
  add_timing_flags(trial, *ta);
  add_live_flags(trial, *ta);
  trial->add_option("--fall-time", ta->fall_time, "fall time s (default: drawn from --seed)");
  trial->add_flag("--missed", ta->missed, "the detector never fires");
  trial->callback([&g, &action, ta] {
    action = [&g, ta] {
      CampaignArgs a = *ta;
      a.trials = 1;
      a.schedule = a.missed ? "0of1" : "1of1";
      if (a.fall_time) a.fall_min = a.fall_max = *a.fall_time;
      return run_live(g, a, campaign_config(g, a));
    };
  });
}

}  // namespace falldet::cli
