#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "falldet/error.hpp"
#include "falldet/sim/astar.hpp"
#include "falldet/sim/grid_map.hpp"
#include "falldet/sim/live.hpp"
#include "falldet/sim/trial.hpp"
#include "oracles.hpp"

using namespace falldet;
using namespace falldet::sim;

namespace {

const char* kSmall =
    "res 0.5\n"
    "R....\n"
    ".....\n"
    "..A..\n"
    ".....\n"
    "B...F\n";

}  // namespace

TEST(Map, SmallOpenMapLoads) {
  const GridMap m = load_map(kSmall);
  EXPECT_EQ(m.width, 5);
  EXPECT_EQ(m.height, 5);
  EXPECT_DOUBLE_EQ(m.resolution, 0.5);
  EXPECT_EQ(m.robot_start, (Point{0, 0}));
  EXPECT_EQ(m.patrol_a, (Point{2, 2}));
  EXPECT_EQ(m.fall_location, (Point{4, 4}));
  EXPECT_TRUE(astar(m, m.robot_start, m.fall_location).found);
  EXPECT_EQ(load_map(to_text(m)).cells, m.cells);
}

TEST(Map, OutsideIsObstacle) {
  const GridMap m = load_map(kSmall);
  EXPECT_FALSE(m.traversable({-1, 0}));
  EXPECT_FALSE(m.traversable({0, 5}));
}

TEST(Map, SealedFallIsRejected) {
  const char* sealed =
      "res 0.5\n"
      "R..#.\n"
      "A..#.\n"
      "...##\n"
      "B....\n"
      ".....\n";
  // F missing entirely
  EXPECT_THROW(load_map(sealed), ParseError);
  const char* walled =
      "res 0.5\n"
      "R..#F\n"
      "A..##\n"
      ".....\n"
      "B....\n";
  try {
    load_map(walled);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("reach"), std::string::npos) << e.what();
  }
}

TEST(Map, MalformedInputsNameTheLine) {
  EXPECT_THROW(load_map("R.A\nB.F\n"), ParseError);                 // no res header
  EXPECT_THROW(load_map("res 0.5\nR.A\nB.\n..F\n"), ParseError);    // ragged
  EXPECT_THROW(load_map("res 0.5\nR.A\nB?F\n"), ParseError);        // unknown symbol
  EXPECT_THROW(load_map("res 0.5\nRRA\nB.F\n"), ParseError);        // duplicate R
  EXPECT_THROW(load_map("res -1\nR.A\nB.F\n"), ParseError);         // bad resolution
  try {
    load_map("res 0.5\n; comment\nR.A\nB?F\n", "x.map");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("x.map:4"), std::string::npos) << e.what();
  }
}

TEST(Map, BundledFileMatchesEmbeddedCopy) {
  std::ifstream in(std::string(FALLDET_DATA_DIR) + "/maps/two_rooms.map");
  ASSERT_TRUE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), bundled_map_text());
  EXPECT_EQ(read_map_file(std::string(FALLDET_DATA_DIR) + "/maps/two_rooms.map").cells, bundled_map().cells);
}

TEST(Map, BundledShortestPathCrossesOneDoor) {
  const GridMap m = bundled_map();
  for (double penalty : {0.0, 60.0}) {
    const PathResult r = astar(m, m.robot_start, m.fall_location, penalty);
    ASSERT_TRUE(r.found);
    std::size_t doors = 0;
    for (const auto& p : r.path) doors += m.at(p) == Cell::kDoor;
    EXPECT_EQ(doors, 1u);
    EXPECT_EQ(r.door_cells, 1u);
    EXPECT_EQ(r.cost, oracle::dijkstra(m, m.robot_start, m.fall_location, penalty));
  }
}

TEST(AStar, StraightLineOnEmptyGrid) {
  GridMap m;
  m.width = m.height = 10;
  m.cells.assign(100, Cell::kFree);
  const PathResult r = astar(m, {0, 0}, {0, 9});
  ASSERT_TRUE(r.found);
  EXPECT_EQ(r.cost, 9.0);
  for (int c = 1; c <= 9; ++c) EXPECT_EQ(r.path[c - 1], (Point{0, c}));
}

TEST(AStar, StartIsGoal) {
  const GridMap m = load_map(kSmall);
  const PathResult r = astar(m, m.patrol_a, m.patrol_a);
  EXPECT_TRUE(r.found);
  EXPECT_TRUE(r.path.empty());
  EXPECT_EQ(r.cost, 0.0);
}

TEST(AStar, UnreachableAndBlockedEndpoints) {
  GridMap m;
  m.width = 3;
  m.height = 1;
  m.cells = {Cell::kFree, Cell::kObstacle, Cell::kFree};
  EXPECT_FALSE(astar(m, {0, 0}, {0, 2}).found);
  EXPECT_FALSE(astar(m, {0, 0}, {0, 1}).found);
  EXPECT_FALSE(astar(m, {0, 0}, {5, 5}).found);
}

TEST(AStar, DoorPenaltyPrefersDetour) {
  GridMap m = load_map(
      "res 1\n"
      "R.D.F\n"
      "A...B\n");
  const PathResult cheap = astar(m, m.robot_start, m.fall_location, 0.0);
  EXPECT_EQ(cheap.door_cells, 1u);
  const PathResult costly = astar(m, m.robot_start, m.fall_location, 10.0);
  EXPECT_EQ(costly.door_cells, 0u);
  EXPECT_EQ(costly.cost, 6.0);
}

TEST(AStar, MatchesDijkstraOnRandomGrids) {
  Rng rng(2024);
  int solvable = 0;
  for (int i = 0; i < 60; ++i) {
    const GridMap m = oracle::random_grid(30, 30, 0.3, i % 2 ? 0.05 : 0.0, rng);
    const Point s = oracle::random_open_cell(m, rng), g = oracle::random_open_cell(m, rng);
    const double pen = i % 3 == 0 ? 7.5 : 0.0;
    const PathResult r = astar(m, s, g, pen);
    const double want = oracle::dijkstra(m, s, g, pen);
    ASSERT_EQ(r.found, std::isfinite(want)) << "grid " << i;
    if (!r.found) continue;
    ++solvable;
    EXPECT_EQ(r.cost, want) << "grid " << i;
    EXPECT_TRUE(oracle::valid_path(m, s, r.path));
    EXPECT_EQ(r.path.empty() ? s : r.path.back(), g);
  }
  EXPECT_GT(solvable, 20);
}

TEST(AStar, DeterministicTieBreak) {
  GridMap m;
  m.width = m.height = 6;
  m.cells.assign(36, Cell::kFree);
  EXPECT_EQ(astar(m, {0, 0}, {5, 5}).path, astar(m, {0, 0}, {5, 5}).path);
}

TEST(Timing, DefaultsAndPenalty) {
  const GridMap m = bundled_map();
  TimingConfig t;
  EXPECT_DOUBLE_EQ(t.tick(m), 0.5);
  EXPECT_DOUBLE_EQ(door_penalty_cells(30.0, 0.5, 0.25), 60.0);
  t.speed_mps = 0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Patrol, VisitsAThenCyclesThroughB) {
  const GridMap m = bundled_map();
  const TimingConfig t;
  const Patrol p(m, t);
  EXPECT_EQ(p.at_step(0), m.robot_start);
  EXPECT_EQ(p.at_step(p.lead_in_steps()), m.patrol_a);
  const std::size_t ab = astar(m, m.patrol_a, m.patrol_b, 60).moves();
  EXPECT_EQ(p.cycle_steps(), 2 * ab);
  EXPECT_EQ(p.at_step(p.lead_in_steps() + ab), m.patrol_b);
  EXPECT_EQ(p.at_step(p.lead_in_steps() + 2 * ab), m.patrol_a);
  EXPECT_EQ(p.at_time(p.lead_in_steps() * 0.5 + 0.49), m.patrol_a);
}

namespace {

TrialEvents alarm_at(double fall, std::vector<double> alarms) { return {1, fall, "fall", std::move(alarms)}; }

}  // namespace

TEST(Trial, DefaultMapFinishesWithinThreeMinutes) {
  const GridMap m = bundled_map();
  const TimingConfig t;
  for (double fall = 0; fall < 200; fall += 7) {
    const auto r = run_trial(m, t, alarm_at(fall, {detection_time(t, fall) + 0.01}));
    EXPECT_EQ(r.outcome, Outcome::kSuccess);
    EXPECT_LE(r.total_response_s, 180.0) << "fall at " << fall;
    EXPECT_DOUBLE_EQ(r.total_response_s, r.alarm_latency_s + r.nav_time_s + r.door_time_s);
    EXPECT_EQ(r.door_cells, 1u);
  }
}

TEST(Trial, NavDifferenceAtAAndBIsThePatrolLeg) {
  const GridMap m = bundled_map();
  const TimingConfig t;
  const Patrol p(m, t);
  const double tick = t.tick(m);
  const std::size_t ab = astar(m, m.patrol_a, m.patrol_b, 60).moves();
  const double at_a = double(p.lead_in_steps() + 2 * ab) * tick;  // back at A after a lap
  const double at_b = double(p.lead_in_steps() + ab) * tick;
  const auto ra = run_trial(m, t, alarm_at(at_a - 3, {at_a}));
  const auto rb = run_trial(m, t, alarm_at(at_b - 3, {at_b}));
  ASSERT_EQ(ra.alarm_cell, m.patrol_a);
  ASSERT_EQ(rb.alarm_cell, m.patrol_b);
  EXPECT_EQ(ra.outcome, Outcome::kSuccess);
  EXPECT_EQ(rb.outcome, Outcome::kSuccess);
  const double oracle_ab = oracle::dijkstra(m, m.patrol_a, m.patrol_b, 0.0);
  EXPECT_DOUBLE_EQ(ra.nav_time_s - rb.nav_time_s, oracle_ab * tick);
}

TEST(Trial, MissedDetectionDoesNotNavigate) {
  const auto r = run_trial(bundled_map(), TimingConfig{}, alarm_at(30, {}));
  EXPECT_EQ(r.outcome, Outcome::kMissedDetection);
  EXPECT_FALSE(r.detected);
  EXPECT_EQ(r.path_moves, 0u);
  EXPECT_EQ(r.nav_time_s, 0.0);
}

TEST(Trial, AlarmOutsideWindowIsAMiss) {
  TimingConfig t;
  t.window_s = 50;
  EXPECT_EQ(run_trial(bundled_map(), t, alarm_at(30, {10.0, 81.0})).outcome, Outcome::kMissedDetection);
}

TEST(Trial, SlowArrivalIsTimeout) {
  TimingConfig t;
  t.door_time_s = 400;
  t.window_s = 300;
  const auto r = run_trial(bundled_map(), t, alarm_at(30, {33.0}));
  EXPECT_EQ(r.outcome, Outcome::kTimeout);
  EXPECT_TRUE(r.detected);
}

TEST(Trial, DuplicatesDoNotChangeTheReport) {
  const GridMap m = bundled_map();
  const TimingConfig t;
  const auto once = run_trial(m, t, alarm_at(40, {43.2}));
  const auto dup = run_trial(m, t, alarm_at(40, {43.2, 43.4, 60.0, 43.2}));
  EXPECT_EQ(once, dup);
  EXPECT_DOUBLE_EQ(once.alarm_time_s, 43.5);  // next tick
}

TEST(Trial, TimelineCoversDoor) {
  const GridMap m = bundled_map();
  const TimingConfig t;
  const auto r = run_trial(m, t, alarm_at(40, {43.0}));
  const auto tl = trial_timeline(m, t, r);
  ASSERT_GE(tl.size(), 5u);
  EXPECT_EQ(tl[1].mode, Mode::kResponding);
  EXPECT_EQ(tl.back().mode, Mode::kArrived);
  EXPECT_EQ(tl.back().position, m.fall_location);
  EXPECT_DOUBLE_EQ(tl.back().clock_s, r.fall_time_s + r.total_response_s);
  int doors = 0;
  for (const auto& s : tl) doors += s.mode == Mode::kDoorTraversal;
  EXPECT_EQ(doors, 1);
}

TEST(Schedule, Parsing) {
  const auto s = parse_schedule("7of8");
  EXPECT_EQ(s.detected, 7u);
  EXPECT_EQ(s.total, 8u);
  for (const char* bad : {"", "7", "of8", "9of8", "7of", "7 of 8", "0of0"}) {
    EXPECT_THROW(parse_schedule(bad), ConfigError) << bad;
  }
}

TEST(Campaign, SevenOfEight) {
  CampaignConfig c;
  c.schedule = parse_schedule("7of8");
  const auto r = run_campaign(bundled_map(), c);
  ASSERT_EQ(r.trials.size(), 8u);
  EXPECT_DOUBLE_EQ(r.success_rate, 0.875);
  std::size_t missed = 0;
  for (const auto& t : r.trials) {
    missed += t.outcome == Outcome::kMissedDetection;
    if (t.outcome == Outcome::kSuccess) {
      EXPECT_LE(t.total_response_s, 180.0);
    }
    EXPECT_EQ(t.fall_time_s, std::floor(t.fall_time_s));
    EXPECT_GE(t.fall_time_s, 20.0);
    EXPECT_LE(t.fall_time_s, 120.0);
  }
  EXPECT_EQ(missed, 1u);
}

TEST(Campaign, AllDetectedIsFullSuccess) {
  CampaignConfig c;
  c.n_trials = 5;
  EXPECT_DOUBLE_EQ(run_campaign(bundled_map(), c).success_rate, 1.0);
}

TEST(Campaign, TotalsEqualPerTrialRecomputation) {
  const GridMap m = bundled_map();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CampaignConfig c;
    c.n_trials = 10;
    c.schedule = Schedule{7, 10};
    c.seed = seed;
    const auto r = run_campaign(m, c);
    double sum = 0.0;
    std::size_t ok = 0;
    for (const auto& t : r.trials) {
      const auto again = run_trial(m, c.timing, {t.trial_id, t.fall_time_s, t.detection_class,
                                                  t.detected ? std::vector<double>{t.alarm_time_s} : std::vector<double>{}});
      EXPECT_EQ(again, t);
      if (t.outcome == Outcome::kSuccess) {
        ++ok;
        sum += t.total_response_s;
      }
    }
    EXPECT_DOUBLE_EQ(r.success_rate, double(ok) / 10.0);
    EXPECT_DOUBLE_EQ(r.mean_response_s, sum / double(ok));
  }
}

TEST(Campaign, DeterministicPerSeed) {
  CampaignConfig c;
  c.schedule = Schedule{7, 8};
  const GridMap m = bundled_map();
  EXPECT_EQ(to_json(run_campaign(m, c)), to_json(run_campaign(m, c)));
  c.seed = 2;
  const auto plans1 = plan_campaign(c);
  c.seed = 3;
  const auto plans2 = plan_campaign(c);
  bool differ = false;
  for (std::size_t i = 0; i < plans1.size(); ++i) differ |= plans1[i].fall_time_s != plans2[i].fall_time_s;
  EXPECT_TRUE(differ);
}

TEST(Campaign, ScheduleMustMatchTrialCount) {
  CampaignConfig c;
  c.schedule = Schedule{7, 9};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Campaign, CsvLayout) {
  CampaignConfig c;
  c.n_trials = 2;
  c.schedule = Schedule{1, 2};
  const std::string csv = to_csv(run_campaign(bundled_map(), c));
  std::istringstream in(csv);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header,
            "trial_id,detected,detection_class,fall_time_s,alarm_latency_s,nav_time_s,door_time_s,total_response_s,outcome");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(Live, LoopbackCampaignMatchesOffline) {
  CampaignConfig c;
  c.schedule = Schedule{7, 8};
  LiveCampaignOptions opt;
  opt.campaign = c;
  opt.inject_disconnect = true;
  const GridMap m = bundled_map();
  const auto live = run_live_campaign(m, opt);
  EXPECT_EQ(to_json(live.report), to_json(run_campaign(m, c)));
  EXPECT_EQ(live.duplicate_alarms, 1u);
  EXPECT_EQ(live.wall_latency_ms.size(), 7u);
  EXPECT_EQ(live.service_latency.alarms.size(), 7u);
}
