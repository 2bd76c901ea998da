#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace falldet::sim {

enum class Cell : std::uint8_t { kFree, kObstacle, kDoor };

struct Point {
  int row = 0;
  int col = 0;
  auto operator<=>(const Point&) const = default;
};

/// Occupancy grid. Cells outside the grid behave as obstacles, so an
/// explicit '#' border is optional.
struct GridMap {
  int width = 0;
  int height = 0;
  double resolution = 0.25;  // metres per cell
  std::vector<Cell> cells;   // row-major
  Point robot_start;
  Point patrol_a;
  Point patrol_b;
  Point fall_location;

  bool in_bounds(Point p) const noexcept { return p.row >= 0 && p.col >= 0 && p.row < height && p.col < width; }
  Cell at(Point p) const noexcept {
    return in_bounds(p) ? cells[static_cast<std::size_t>(p.row) * width + p.col] : Cell::kObstacle;
  }
  void set(Point p, Cell c) { cells.at(static_cast<std::size_t>(p.row) * width + p.col) = c; }
  bool traversable(Point p) const noexcept { return at(p) != Cell::kObstacle; }
};

/// Parses the ASCII format:
///   res <metres>
///   rows of '#' obstacle, '.' free, 'D' closed door, 'R' robot start,
///   'A'/'B' patrol points, 'F' fall location (each named cell once)
/// Blank lines and lines starting with ';' are ignored. Throws ParseError
/// with a line number for ragged rows, unknown symbols, a missing or
/// duplicate named cell, or an F that cannot be reached from R.
GridMap load_map(std::string_view text, const std::string& source = "<map>");
GridMap read_map_file(const std::filesystem::path& path);
std::string to_text(const GridMap& map);

/// The bundled two-room map: a patrol room and a second room joined by a
/// single closed door.
std::string_view bundled_map_text();
GridMap bundled_map();

}  // namespace falldet::sim
