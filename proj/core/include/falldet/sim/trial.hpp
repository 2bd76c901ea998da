#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "falldet/sim/astar.hpp"
#include "falldet/sim/grid_map.hpp"

namespace falldet::sim {

struct TimingConfig {
  double speed_mps = 0.5;
  double door_time_s = 30.0;  // per closed door cell crossed
  double window_s = 300.0;    // after the fall: no alarm by then is a miss
  double prediction_period_s = 1.0;  // one classifier window per period
  std::size_t consecutive_k = 3;     // detector debounce, see DecisionPolicy

  void validate() const;
  /// Seconds per grid move; the simulator's clock tick.
  double tick(const GridMap& map) const { return map.resolution / speed_mps; }
};

enum class Mode { kPatrolling, kResponding, kDoorTraversal, kArrived };
const char* to_string(Mode m) noexcept;

struct RobotState {
  Point position;
  Mode mode = Mode::kPatrolling;
  double speed_mps = 0.0;
  double clock_s = 0.0;

  bool operator==(const RobotState&) const = default;
};

/// Patrol R -> A, then A <-> B forever, one cell per tick.
class Patrol {
 public:
  Patrol(const GridMap& map, const TimingConfig& timing);
  /// Cell occupied after `step` ticks.
  Point at_step(std::size_t step) const;
  /// Cell occupied at time t (t is rounded down to a whole tick).
  Point at_time(double t) const;
  std::size_t lead_in_steps() const noexcept { return lead_.size() - 1; }
  std::size_t cycle_steps() const noexcept { return cycle_.size(); }

 private:
  std::vector<Point> lead_;   // R ... A
  std::vector<Point> cycle_;  // A ... B ... (back to, not including) A
  double tick_;
};

enum class Outcome { kSuccess, kMissedDetection, kTimeout };
const char* to_string(Outcome o) noexcept;

struct TrialEvents {
  int trial_id = 0;
  double fall_time_s = 0.0;           // sim clock
  std::string detection_class;        // what the detector reported
  std::vector<double> alarm_times_s;  // receipt times; duplicates allowed
};

struct TrialReport {
  int trial_id = 0;
  bool detected = false;
  std::string detection_class;
  double fall_time_s = 0.0;
  double alarm_time_s = 0.0;  // receipt, on the tick grid
  double alarm_latency_s = 0.0;
  double nav_time_s = 0.0;
  double door_time_s = 0.0;
  double total_response_s = 0.0;
  Outcome outcome = Outcome::kMissedDetection;
  Point alarm_cell;  // where the patrol was when the alarm arrived
  std::size_t path_moves = 0;
  std::size_t door_cells = 0;
  std::string diagnostics;

  bool operator==(const TrialReport&) const = default;
};

/// Rounds a receipt up onto the tick grid (the robot reacts at the next tick).
double quantize_up(double t, double tick);

/// Runs one trial. The earliest alarm in [fall, fall + window] counts; any
/// further (duplicate) alarm is ignored.
TrialReport run_trial(const GridMap& map, const TimingConfig& timing, const TrialEvents& events);

/// Mode changes of a trial, reconstructed from its report: patrol start,
/// alarm receipt, each door entry and exit, arrival.
std::vector<RobotState> trial_timeline(const GridMap& map, const TimingConfig& timing, const TrialReport& report);

/// "7of8" -> {7, 8}. Throws ConfigError.
struct Schedule {
  std::size_t detected = 0;
  std::size_t total = 0;
};
Schedule parse_schedule(const std::string& s);

struct TrialPlan {
  int trial_id = 0;
  double fall_time_s = 0.0;
  bool detected = true;
  std::string detection_class;  // "fall", or "normal" for a missed one
};

struct CampaignConfig {
  std::size_t n_trials = 8;
  std::optional<Schedule> schedule;  // unset: every trial detected
  std::uint64_t seed = 1;
  double fall_time_min_s = 20.0;
  double fall_time_max_s = 120.0;
  TimingConfig timing;
  double network_latency_s = 0.01;  // offline stand-in for the service hop

  void validate() const;
};

/// Deterministic trial plan: which trials miss and when each fall happens.
std::vector<TrialPlan> plan_campaign(const CampaignConfig& cfg);

/// Time the detector completes its k-window debounce for a fall at t.
double detection_time(const TimingConfig& timing, double fall_time_s);

struct CampaignReport {
  std::vector<TrialReport> trials;
  double success_rate = 0.0;
  double mean_response_s = 0.0;  // over successful trials
};

CampaignReport summarize(std::vector<TrialReport> trials);
/// Offline campaign: alarm receipt = detection + network_latency_s.
CampaignReport run_campaign(const GridMap& map, const CampaignConfig& cfg);

std::string to_json(const CampaignReport& r);
std::string to_csv(const CampaignReport& r);

}  // namespace falldet::sim
