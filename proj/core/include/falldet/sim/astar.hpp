#pragma once

#include <cstddef>
#include <vector>

#include "falldet/sim/grid_map.hpp"

namespace falldet::sim {

struct PathResult {
  bool found = false;
  std::vector<Point> path;  // cells entered after `start`, ending at goal; empty when start == goal
  double cost = 0.0;        // moves + door_penalty per door cell entered
  std::size_t door_cells = 0;
  std::size_t expanded = 0;
  std::size_t moves() const noexcept { return path.size(); }
};

/// 4-connected A* with the Manhattan heuristic. Every move costs 1 and
/// entering a door cell costs an extra door_penalty (in move units).
/// Open-list ties go to lower h, then to earlier insertion, with
/// neighbours generated in the order down, up, right, left, so the
/// returned path is deterministic. No path gives found == false.
PathResult astar(const GridMap& map, Point start, Point goal, double door_penalty = 0.0);

/// Door penalty in move units for a door that takes door_time_s to pass.
double door_penalty_cells(double door_time_s, double speed_mps, double resolution_m);

}  // namespace falldet::sim
