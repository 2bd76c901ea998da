#include <benchmark/benchmark.h>

#include "falldet/rng.hpp"
#include "falldet/sim/astar.hpp"
#include "falldet/sim/grid_map.hpp"

using namespace falldet;
using namespace falldet::sim;

namespace {

GridMap random_map(int n, double density, Rng& rng) {
  GridMap m;
  m.width = m.height = n;
  m.cells.assign(static_cast<std::size_t>(n * n), Cell::kFree);
  for (auto& c : m.cells) {
    if (rng.uniform() < density) c = Cell::kObstacle;
  }
  m.cells.front() = m.cells.back() = Cell::kFree;
  return m;
}

void BM_AStarRandomGrid(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(9);
  const GridMap m = random_map(n, 0.3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(astar(m, {0, 0}, {n - 1, n - 1}).cost);
}
BENCHMARK(BM_AStarRandomGrid)->Arg(50)->Arg(200);

void BM_AStarBundledMap(benchmark::State& state) {
  const GridMap m = bundled_map();
  const double pen = door_penalty_cells(30.0, 0.5, m.resolution);
  for (auto _ : state) benchmark::DoNotOptimize(astar(m, m.robot_start, m.fall_location, pen).cost);
}
BENCHMARK(BM_AStarBundledMap);

}  // namespace
