#include "falldet/alarm/event_log.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "falldet/error.hpp"

namespace falldet::alarm {

using json = nlohmann::json;

std::string to_json_line(const LogRecord& r) {
  json j;
  j["event"] = r.event;
  j["ts_ms"] = r.ts_ms;
  if (r.event_id) j["event_id"] = *r.event_id;
  if (!r.source_id.empty()) j["source_id"] = r.source_id;
  if (!r.peer.empty()) j["peer"] = r.peer;
  if (!r.detail.empty()) j["detail"] = r.detail;
  return j.dump();
}

LogRecord parse_log_line(const std::string& line) {
  try {
    const json j = json::parse(line);
    LogRecord r;
    r.event = j.at("event").get<std::string>();
    r.ts_ms = j.at("ts_ms").get<std::int64_t>();
    if (j.contains("event_id")) r.event_id = j["event_id"].get<std::int64_t>();
    r.source_id = j.value("source_id", std::string{});
    r.peer = j.value("peer", std::string{});
    r.detail = j.value("detail", std::string{});
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad log record: ") + e.what());
  }
}

std::vector<LogRecord> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open event log", path.string(), 0);
  std::vector<LogRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(parse_log_line(line));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), path.string(), n);
    }
  }
  return out;
}

namespace {

LatencyStats summarize(const std::vector<double>& v) {
  LatencyStats s;
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean_ms = sum / static_cast<double>(v.size());
  s.max_ms = *std::max_element(v.begin(), v.end());
  return s;
}

}  // namespace

LatencyReport record_latency(std::span<const LogRecord> log) {
  std::map<std::int64_t, std::int64_t> alarm_ts, detect_ts, ack_ts;
  for (const auto& r : log) {
    if (!r.event_id) continue;
    const std::int64_t id = *r.event_id;
    if (r.event == "fall_alarm") {
      alarm_ts.emplace(id, r.ts_ms);
    } else if (r.event == "detection") {
      detect_ts.emplace(id, r.ts_ms);
    } else if (r.event == "ack") {
      auto [it, fresh] = ack_ts.emplace(id, r.ts_ms);
      if (!fresh) it->second = std::min(it->second, r.ts_ms);
    }
  }

  LatencyReport rep;
  std::vector<double> d2a, a2k;
  for (const auto& [id, ts] : alarm_ts) {
    AlarmLatency a;
    a.event_id = id;
    if (auto it = detect_ts.find(id); it != detect_ts.end()) a.detection_to_alarm_ms = double(ts - it->second);
    if (auto it = ack_ts.find(id); it != ack_ts.end()) a.alarm_to_ack_ms = double(it->second - ts);
    a.matched = a.detection_to_alarm_ms && a.alarm_to_ack_ms;
    if (a.matched) {
      d2a.push_back(*a.detection_to_alarm_ms);
      a2k.push_back(*a.alarm_to_ack_ms);
    } else {
      ++rep.unmatched;
    }
    rep.alarms.push_back(a);
  }
  rep.detection_to_alarm = summarize(d2a);
  rep.alarm_to_ack = summarize(a2k);
  return rep;
}

std::string to_json(const LatencyReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  auto stats = [](const LatencyStats& s) { return json{{"count", s.count}, {"mean_ms", s.mean_ms}, {"max_ms", s.max_ms}}; };
  json alarms = json::array();
  for (const auto& a : r.alarms) {
    alarms.push_back({{"event_id", a.event_id},
                      {"detection_to_alarm_ms", opt(a.detection_to_alarm_ms)},
                      {"alarm_to_ack_ms", opt(a.alarm_to_ack_ms)},
                      {"matched", a.matched}});
  }
  json j{{"alarms", alarms},
         {"detection_to_alarm", stats(r.detection_to_alarm)},
         {"alarm_to_ack", stats(r.alarm_to_ack)},
         {"unmatched", r.unmatched}};
  return j.dump(2);
}

}  // namespace falldet::alarm
