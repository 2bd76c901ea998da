#include "falldet/sim/trial.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "falldet/error.hpp"
#include "falldet/rng.hpp"

namespace falldet::sim {

void TimingConfig::validate() const {
  if (!(speed_mps > 0.0)) throw ConfigError("speed must be positive");
  if (!(door_time_s >= 0.0)) throw ConfigError("door_time must be >= 0");
  if (!(window_s > 0.0)) throw ConfigError("trial window must be positive");
  if (!(prediction_period_s > 0.0)) throw ConfigError("prediction period must be positive");
  if (consecutive_k < 1) throw ConfigError("consecutive_k must be >= 1");
}

const char* to_string(Mode m) noexcept {
  switch (m) {
    case Mode::kPatrolling: return "patrolling";
    case Mode::kResponding: return "responding";
    case Mode::kDoorTraversal: return "door_traversal";
    case Mode::kArrived: return "arrived";
  }
  return "?";
}

const char* to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::kSuccess: return "success";
    case Outcome::kMissedDetection: return "missed_detection";
    case Outcome::kTimeout: return "timeout";
  }
  return "?";
}

namespace {

std::vector<Point> leg(const GridMap& map, Point from, Point to, double penalty, const char* what) {
  const PathResult r = astar(map, from, to, penalty);
  if (!r.found) throw ConfigError(std::string("patrol leg ") + what + " is unreachable");
  return r.path;
}

std::string cell_str(Point p) { return "(" + std::to_string(p.row) + "," + std::to_string(p.col) + ")"; }

}  // namespace

Patrol::Patrol(const GridMap& map, const TimingConfig& timing) : tick_(timing.tick(map)) {
  timing.validate();
  const double pen = door_penalty_cells(timing.door_time_s, timing.speed_mps, map.resolution);
  lead_.push_back(map.robot_start);
  for (Point p : leg(map, map.robot_start, map.patrol_a, pen, "R->A")) lead_.push_back(p);
  cycle_.push_back(map.patrol_a);
  for (Point p : leg(map, map.patrol_a, map.patrol_b, pen, "A->B")) cycle_.push_back(p);
  auto back = leg(map, map.patrol_b, map.patrol_a, pen, "B->A");
  if (!back.empty()) back.pop_back();  // A starts the next lap
  cycle_.insert(cycle_.end(), back.begin(), back.end());
}

Point Patrol::at_step(std::size_t step) const {
  if (step < lead_.size()) return lead_[step];
  return cycle_[(step - lead_in_steps()) % cycle_.size()];
}

Point Patrol::at_time(double t) const {
  if (!(t >= 0.0)) return lead_.front();
  return at_step(static_cast<std::size_t>(std::floor(t / tick_ + 1e-9)));
}

double quantize_up(double t, double tick) {
  return std::ceil(t / tick - 1e-9) * tick;
}

TrialReport run_trial(const GridMap& map, const TimingConfig& timing, const TrialEvents& ev) {
  timing.validate();
  TrialReport rep;
  rep.trial_id = ev.trial_id;
  rep.detection_class = ev.detection_class;
  rep.fall_time_s = ev.fall_time_s;

  std::optional<double> first;
  for (double a : ev.alarm_times_s) {
    if (a < ev.fall_time_s || a > ev.fall_time_s + timing.window_s) continue;
    if (!first || a < *first) first = a;
  }
  if (!first) {
    rep.outcome = Outcome::kMissedDetection;
    rep.diagnostics = "no alarm within the trial window";
    return rep;
  }

  const double tick = timing.tick(map);
  rep.detected = true;
  rep.alarm_time_s = quantize_up(*first, tick);
  rep.alarm_latency_s = rep.alarm_time_s - ev.fall_time_s;
  rep.alarm_cell = Patrol(map, timing).at_time(rep.alarm_time_s);

  const double pen = door_penalty_cells(timing.door_time_s, timing.speed_mps, map.resolution);
  const PathResult path = astar(map, rep.alarm_cell, map.fall_location, pen);
  if (!path.found) {
    rep.outcome = Outcome::kTimeout;
    rep.diagnostics = "fall location unreachable from " + cell_str(rep.alarm_cell);
    return rep;
  }
  rep.path_moves = path.moves();
  rep.door_cells = path.door_cells;
  rep.nav_time_s = static_cast<double>(path.moves()) * tick;
  rep.door_time_s = static_cast<double>(path.door_cells) * timing.door_time_s;
  rep.total_response_s = rep.alarm_latency_s + rep.nav_time_s + rep.door_time_s;
  if (rep.total_response_s > timing.window_s) {
    rep.outcome = Outcome::kTimeout;
    rep.diagnostics = "arrival after the trial window";
  } else {
    rep.outcome = Outcome::kSuccess;
  }
  return rep;
}

std::vector<RobotState> trial_timeline(const GridMap& map, const TimingConfig& timing, const TrialReport& rep) {
  std::vector<RobotState> out;
  out.push_back({map.robot_start, Mode::kPatrolling, timing.speed_mps, 0.0});
  if (!rep.detected) return out;
  const double tick = timing.tick(map);
  double clock = rep.alarm_time_s;
  out.push_back({rep.alarm_cell, Mode::kResponding, timing.speed_mps, clock});
  const double pen = door_penalty_cells(timing.door_time_s, timing.speed_mps, map.resolution);
  const PathResult path = astar(map, rep.alarm_cell, map.fall_location, pen);
  if (!path.found) return out;
  for (Point p : path.path) {
    clock += tick;
    if (map.at(p) == Cell::kDoor) {
      out.push_back({p, Mode::kDoorTraversal, 0.0, clock});
      clock += timing.door_time_s;
      out.push_back({p, Mode::kResponding, timing.speed_mps, clock});
    }
  }
  out.push_back({map.fall_location, Mode::kArrived, 0.0, clock});
  return out;
}

Schedule parse_schedule(const std::string& s) {
  const auto of = s.find("of");
  Schedule sc;
  auto num = [&](std::string_view v, std::size_t& out) {
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    return ec == std::errc{} && p == v.data() + v.size() && !v.empty();
  };
  if (of == std::string::npos || !num(std::string_view(s).substr(0, of), sc.detected) ||
      !num(std::string_view(s).substr(of + 2), sc.total)) {
    throw ConfigError("schedule must look like '7of8', got '" + s + "'");
  }
  if (sc.total < 1 || sc.detected > sc.total) throw ConfigError("schedule needs 0 <= detected <= total, total >= 1");
  return sc;
}

void CampaignConfig::validate() const {
  timing.validate();
  if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
  if (schedule && schedule->total != n_trials) {
    throw ConfigError("schedule covers " + std::to_string(schedule->total) + " trials but n_trials is " +
                      std::to_string(n_trials));
  }
  if (!(fall_time_min_s >= 0.0) || fall_time_max_s < fall_time_min_s) throw ConfigError("bad fall time range");
  if (!(network_latency_s >= 0.0)) throw ConfigError("network latency must be >= 0");
}

std::vector<TrialPlan> plan_campaign(const CampaignConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(cfg.n_trials);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  const std::size_t misses = cfg.schedule ? cfg.schedule->total - cfg.schedule->detected : 0;
  std::vector<bool> missed(cfg.n_trials, false);
  for (std::size_t i = 0; i < misses; ++i) missed[order[i]] = true;

  // Whole seconds keep reports readable and exactly reproducible.
  const auto lo = static_cast<std::uint64_t>(std::ceil(cfg.fall_time_min_s));
  const auto hi = static_cast<std::uint64_t>(std::floor(cfg.fall_time_max_s));
  std::vector<TrialPlan> plans;
  for (std::size_t i = 0; i < cfg.n_trials; ++i) {
    TrialPlan p;
    p.trial_id = static_cast<int>(i + 1);
    p.fall_time_s = static_cast<double>(lo + (hi >= lo ? rng.below(hi - lo + 1) : 0));
    p.detected = !missed[i];
    p.detection_class = p.detected ? "fall" : "normal";
    plans.push_back(p);
  }
  return plans;
}

double detection_time(const TimingConfig& timing, double fall_time_s) {
  return fall_time_s + static_cast<double>(timing.consecutive_k) * timing.prediction_period_s;
}

CampaignReport summarize(std::vector<TrialReport> trials) {
  CampaignReport r;
  r.trials = std::move(trials);
  std::size_t ok = 0;
  double sum = 0.0;
  for (const auto& t : r.trials) {
    if (t.outcome == Outcome::kSuccess) {
      ++ok;
      sum += t.total_response_s;
    }
  }
  if (!r.trials.empty()) r.success_rate = static_cast<double>(ok) / static_cast<double>(r.trials.size());
  if (ok) r.mean_response_s = sum / static_cast<double>(ok);
  return r;
}

CampaignReport run_campaign(const GridMap& map, const CampaignConfig& cfg) {
  std::vector<TrialReport> reports;
  for (const TrialPlan& p : plan_campaign(cfg)) {
    TrialEvents ev{p.trial_id, p.fall_time_s, p.detection_class, {}};
    if (p.detected) ev.alarm_times_s.push_back(detection_time(cfg.timing, p.fall_time_s) + cfg.network_latency_s);
    reports.push_back(run_trial(map, cfg.timing, ev));
  }
  return summarize(std::move(reports));
}

std::string to_json(const CampaignReport& r) {
  using json = nlohmann::ordered_json;
  json trials = json::array();
  for (const auto& t : r.trials) {
    json j;
    j["trial_id"] = t.trial_id;
    j["detected"] = t.detected;
    j["detection_class"] = t.detection_class;
    j["fall_time_s"] = t.fall_time_s;
    j["alarm_time_s"] = t.alarm_time_s;
    j["alarm_latency_s"] = t.alarm_latency_s;
    j["nav_time_s"] = t.nav_time_s;
    j["door_time_s"] = t.door_time_s;
    j["total_response_s"] = t.total_response_s;
    j["outcome"] = to_string(t.outcome);
    j["alarm_cell"] = {t.alarm_cell.row, t.alarm_cell.col};
    j["path_moves"] = t.path_moves;
    j["door_cells"] = t.door_cells;
    if (!t.diagnostics.empty()) j["diagnostics"] = t.diagnostics;
    trials.push_back(std::move(j));
  }
  json out;
  out["trials"] = std::move(trials);
  out["success_rate"] = r.success_rate;
  out["mean_response_s"] = r.mean_response_s;
  return out.dump(2) + "\n";
}

std::string to_csv(const CampaignReport& r) {
  std::ostringstream out;
  out << "trial_id,detected,detection_class,fall_time_s,alarm_latency_s,nav_time_s,door_time_s,total_response_s,outcome\n";
  for (const auto& t : r.trials) {
    out << t.trial_id << ',' << (t.detected ? 1 : 0) << ',' << t.detection_class << ',' << t.fall_time_s << ','
        << t.alarm_latency_s << ',' << t.nav_time_s << ',' << t.door_time_s << ',' << t.total_response_s << ','
        << to_string(t.outcome) << '\n';
  }
  return out.str();
}

}  // namespace falldet::sim
