#include "falldet/sim/grid_map.hpp"

#include <charconv>
#include <fstream>
#include <queue>
#include <sstream>

#include "falldet/error.hpp"

namespace falldet::sim {

namespace {

// Keep in sync with data/maps/two_rooms.map (a test compares them).
constexpr std::string_view kTwoRooms = R"MAP(; two rooms joined by one closed door, 0.25 m cells
res 0.25
###################################################################
#................................#................................#
#...................#######......#................###########.....#
#...................#######......#................###########.....#
#...................#######......#................###########.....#
#...................#######......#................###########.....#
#................................#................###########.....#
#................................#................###########.....#
#................................#................................#
#................................#................................#
#.A...........................B..D................................#
#................................#................................#
#................................#................................#
#................................#................................#
#.......#######..................#................................#
#.......#######..................#..........................F.....#
#.......#######..................#....####........................#
#.......#######..................#....####........................#
#...R...#######..................#....####........................#
#................................#....####........................#
#................................#................................#
###################################################################
)MAP";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

bool reachable(const GridMap& m, Point from, Point to) {
  std::vector<char> seen(m.cells.size(), 0);
  std::queue<Point> q;
  q.push(from);
  seen[static_cast<std::size_t>(from.row) * m.width + from.col] = 1;
  constexpr int dr[4] = {1, -1, 0, 0};
  constexpr int dc[4] = {0, 0, 1, -1};
  while (!q.empty()) {
    const Point p = q.front();
    q.pop();
    if (p == to) return true;
    for (int k = 0; k < 4; ++k) {
      const Point n{p.row + dr[k], p.col + dc[k]};
      if (!m.traversable(n)) continue;
      char& s = seen[static_cast<std::size_t>(n.row) * m.width + n.col];
      if (!s) {
        s = 1;
        q.push(n);
      }
    }
  }
  return false;
}

}  // namespace

GridMap load_map(std::string_view text, const std::string& source) {
  GridMap m;
  bool have_res = false;
  std::vector<std::string> rows;
  std::size_t first_row_line = 0;
  std::size_t line_no = 0;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == ';') continue;
    if (line.substr(0, 4) == "res ") {
      if (have_res) throw ParseError("duplicate res header", source, line_no);
      const std::string_view v = trim(line.substr(4));
      const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), m.resolution);
      if (ec != std::errc{} || p != v.data() + v.size() || !(m.resolution > 0.0)) {
        throw ParseError("res must be a positive number of metres", source, line_no);
      }
      have_res = true;
      continue;
    }
    if (rows.empty()) first_row_line = line_no;
    if (!rows.empty() && line.size() != rows.front().size()) {
      throw ParseError("ragged row: expected " + std::to_string(rows.front().size()) + " cells, got " +
                           std::to_string(line.size()),
                       source, line_no);
    }
    rows.emplace_back(line);
  }
  if (!have_res) throw ParseError("missing 'res <metres>' header", source, line_no);
  if (rows.empty()) throw ParseError("map has no rows", source, line_no);

  m.height = static_cast<int>(rows.size());
  m.width = static_cast<int>(rows.front().size());
  m.cells.assign(static_cast<std::size_t>(m.width) * m.height, Cell::kFree);
  int found[4] = {0, 0, 0, 0};
  Point* named[4] = {&m.robot_start, &m.patrol_a, &m.patrol_b, &m.fall_location};
  constexpr std::string_view kNames = "RABF";
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      const char ch = rows[r][c];
      const Point p{r, c};
      switch (ch) {
        case '#': m.set(p, Cell::kObstacle); break;
        case '.': break;
        case 'D': m.set(p, Cell::kDoor); break;
        default: {
          const auto k = kNames.find(ch);
          if (k == std::string_view::npos) {
            throw ParseError(std::string("unknown map symbol '") + ch + "'", source, first_row_line + r);
          }
          if (found[k]++) throw ParseError(std::string("duplicate '") + ch + "' cell", source, first_row_line + r);
          *named[k] = p;
        }
      }
    }
  }
  for (int k = 0; k < 4; ++k) {
    if (!found[k]) throw ParseError(std::string("missing '") + kNames[k] + "' cell", source, line_no);
  }
  if (!reachable(m, m.robot_start, m.fall_location)) {
    throw ParseError("fall location F is unreachable from robot start R", source, line_no);
  }
  return m;
}

GridMap read_map_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open map", path.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_map(ss.str(), path.string());
}

std::string to_text(const GridMap& m) {
  std::ostringstream out;
  out << "res " << m.resolution << '\n';
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      const Point p{r, c};
      char ch = '.';
      if (m.at(p) == Cell::kObstacle) ch = '#';
      if (m.at(p) == Cell::kDoor) ch = 'D';
      if (p == m.robot_start) ch = 'R';
      if (p == m.patrol_a) ch = 'A';
      if (p == m.patrol_b) ch = 'B';
      if (p == m.fall_location) ch = 'F';
      out << ch;
    }
    out << '\n';
  }
  return out.str();
}

std::string_view bundled_map_text() { return kTwoRooms; }

GridMap bundled_map() { return load_map(kTwoRooms, "two_rooms.map"); }

}  // namespace falldet::sim
