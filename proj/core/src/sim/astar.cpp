#include "falldet/sim/astar.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <queue>
#include <tuple>

#include "falldet/error.hpp"

namespace falldet::sim {

double door_penalty_cells(double door_time_s, double speed_mps, double resolution_m) {
  if (!(speed_mps > 0.0) || !(resolution_m > 0.0)) throw ConfigError("speed and resolution must be positive");
  if (!(door_time_s >= 0.0)) throw ConfigError("door time must be >= 0");
  return door_time_s * speed_mps / resolution_m;
}

namespace {

struct OpenEntry {
  double f;
  double h;
  std::uint64_t seq;
  int index;
  // std::priority_queue pops the largest, so "greater" means worse.
  bool operator<(const OpenEntry& o) const { return std::tie(f, h, seq) > std::tie(o.f, o.h, o.seq); }
};

constexpr int kDr[4] = {1, -1, 0, 0};  // down, up, right, left
constexpr int kDc[4] = {0, 0, 1, -1};

}  // namespace

PathResult astar(const GridMap& map, Point start, Point goal, double door_penalty) {
  if (!(door_penalty >= 0.0)) throw ConfigError("door_penalty must be >= 0");
  PathResult res;
  if (!map.traversable(start) || !map.traversable(goal)) return res;
  if (start == goal) {
    res.found = true;
    return res;
  }

  const int w = map.width;
  const auto n = static_cast<std::size_t>(w) * map.height;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> g(n, inf);
  std::vector<int> parent(n, -1);
  std::vector<char> closed(n, 0);
  auto idx = [w](Point p) { return p.row * w + p.col; };
  auto heuristic = [&](Point p) { return double(std::abs(p.row - goal.row) + std::abs(p.col - goal.col)); };

  std::priority_queue<OpenEntry> open;
  std::uint64_t seq = 0;
  g[idx(start)] = 0.0;
  open.push({heuristic(start), heuristic(start), seq++, idx(start)});

  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    if (closed[top.index]) continue;
    closed[top.index] = 1;
    ++res.expanded;
    const Point p{top.index / w, top.index % w};
    if (p == goal) break;
    for (int k = 0; k < 4; ++k) {
      const Point q{p.row + kDr[k], p.col + kDc[k]};
      if (!map.traversable(q)) continue;
      const int qi = idx(q);
      if (closed[qi]) continue;
      const double step = 1.0 + (map.at(q) == Cell::kDoor ? door_penalty : 0.0);
      const double cand = g[top.index] + step;
      if (cand < g[qi]) {
        g[qi] = cand;
        parent[qi] = top.index;
        const double h = heuristic(q);
        open.push({cand + h, h, seq++, qi});
      }
    }
  }

  const int gi = idx(goal);
  if (!closed[gi]) return res;
  res.found = true;
  res.cost = g[gi];
  for (int i = gi; i != idx(start); i = parent[i]) res.path.push_back({i / w, i % w});
  std::reverse(res.path.begin(), res.path.end());
  for (const Point& p : res.path) {
    if (map.at(p) == Cell::kDoor) ++res.door_cells;
  }
  return res;
}

}  // namespace falldet::sim
