#include "latmap/sim2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "latmap/error.hpp"

namespace latmap::sim {

using nlohmann::json;

Complexity complexity_from_string(const std::string& name) {
  if (name == "simple") return Complexity::simple;
  if (name == "moderate") return Complexity::moderate;
  if (name == "complex") return Complexity::complex;
  fail(ErrorCode::invalid_argument, "unknown complexity: " + name);
}

std::string complexity_name(Complexity c) {
  switch (c) {
    case Complexity::simple: return "simple";
    case Complexity::moderate: return "moderate";
    case Complexity::complex: return "complex";
  }
  fail(ErrorCode::invalid_argument, "bad complexity enum");
}

namespace {

// Lattice wall edges during generation. v(x, y) blocks motion between cells
// (x-1, y) and (x, y); h(x, y) blocks motion between (x, y-1) and (x, y).
struct EdgeGrid {
  int n;
  std::vector<uint8_t> v, h;  // v: (n+1) * n, h: n * (n+1)

  explicit EdgeGrid(int n_) : n(n_), v((n_ + 1) * n_, 0), h(n_ * (n_ + 1), 0) {}

  uint8_t& vert(int x, int y) { return v[x * n + y]; }
  uint8_t& horz(int x, int y) { return h[y * n + x]; }
};

void divide(EdgeGrid& g, Rng& rng, int x0, int x1, int y0, int y1) {
  const int w = x1 - x0;
  const int h = y1 - y0;
  if (w < 2 && h < 2) return;
  bool vertical;
  if (w >= 2 && h >= 2) {
    vertical = (w != h) ? (w > h) : (rng.next_u64() & 1) != 0;
  } else {
    vertical = w >= 2;
  }
  if (vertical) {
    const int wx = x0 + 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(w - 1)));
    const int door = y0 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(h)));
    for (int y = y0; y < y1; ++y)
      if (y != door) g.vert(wx, y) = 1;
    divide(g, rng, x0, wx, y0, y1);
    divide(g, rng, wx, x1, y0, y1);
  } else {
    const int wy = y0 + 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(h - 1)));
    const int door = x0 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(w)));
    for (int x = x0; x < x1; ++x)
      if (x != door) g.horz(x, wy) = 1;
    divide(g, rng, x0, x1, y0, wy);
    divide(g, rng, x0, x1, wy, y1);
  }
}

double removal_fraction(Complexity c) {
  switch (c) {
    case Complexity::simple: return 0.40;
    case Complexity::moderate: return 0.15;
    case Complexity::complex: return 0.0;
  }
  return 0.0;
}

}  // namespace

MazeSpec generate_maze(uint64_t seed, Complexity complexity, int side_cells) {
  require(side_cells >= 2, ErrorCode::invalid_argument, "side_cells must be >= 2");
  const int n = side_cells;
  Rng rng(seed ^ 0x6d617a65ULL);
  EdgeGrid grid(n);
  divide(grid, rng, 0, n, 0, n);

  // Complexity widens corridors by deleting a fraction of the internal wall
  // edges. Deletions never disconnect the maze.
  const double p = removal_fraction(complexity);
  for (int x = 1; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (grid.vert(x, y) && rng.uniform() < p) grid.vert(x, y) = 0;
  for (int y = 1; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (grid.horz(x, y) && rng.uniform() < p) grid.horz(x, y) = 0;

  MazeSpec maze;
  maze.seed = seed;
  maze.complexity = complexity;
  maze.side_cells = n;
  maze.walls.push_back({0.0, 0.0, 1.0, 0.0});
  maze.walls.push_back({1.0, 0.0, 1.0, 1.0});
  maze.walls.push_back({1.0, 1.0, 0.0, 1.0});
  maze.walls.push_back({0.0, 1.0, 0.0, 0.0});

  const double s = 1.0 / n;
  // Merge runs of blocked edges into maximal segments, columns then rows.
  for (int x = 1; x < n; ++x) {
    int y = 0;
    while (y < n) {
      if (!grid.vert(x, y)) {
        ++y;
        continue;
      }
      int y2 = y;
      while (y2 < n && grid.vert(x, y2)) ++y2;
      maze.walls.push_back({x * s, y * s, x * s, y2 * s});
      y = y2;
    }
  }
  for (int y = 1; y < n; ++y) {
    int x = 0;
    while (x < n) {
      if (!grid.horz(x, y)) {
        ++x;
        continue;
      }
      int x2 = x;
      while (x2 < n && grid.horz(x2, y)) ++x2;
      maze.walls.push_back({x * s, y * s, x2 * s, y * s});
      x = x2;
    }
  }
  return maze;
}

namespace {

// Reconstruct blocked lattice edges from wall segments (all walls are
// axis-aligned multiples of the cell size).
bool edge_blocked(const MazeSpec& maze, double ax, double ay, double bx, double by) {
  constexpr double eps = 1e-9;
  for (const auto& w : maze.walls) {
    const double lox = std::min(w.x1, w.x2), hix = std::max(w.x1, w.x2);
    const double loy = std::min(w.y1, w.y2), hiy = std::max(w.y1, w.y2);
    if (std::fabs(w.x1 - w.x2) < eps) {  // vertical wall
      if (std::fabs(ax - w.x1) < eps && std::fabs(bx - w.x1) < eps &&
          std::min(ay, by) >= loy - eps && std::max(ay, by) <= hiy + eps)
        return true;
    } else {  // horizontal wall
      if (std::fabs(ay - w.y1) < eps && std::fabs(by - w.y1) < eps &&
          std::min(ax, bx) >= lox - eps && std::max(ax, bx) <= hix + eps)
        return true;
    }
  }
  return false;
}

}  // namespace

int free_flood_fill_count(const MazeSpec& maze) {
  const int n = maze.side_cells;
  require(n >= 1, ErrorCode::invalid_argument, "maze has no lattice");
  const double s = 1.0 / n;
  std::vector<uint8_t> seen(n * n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 0;
  while (!stack.empty()) {
    const int c = stack.back();
    stack.pop_back();
    ++count;
    const int cx = c % n, cy = c / n;
    const int dx[4] = {1, -1, 0, 0};
    const int dy[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = cx + dx[k], ny = cy + dy[k];
      if (nx < 0 || ny < 0 || nx >= n || ny >= n || seen[ny * n + nx]) continue;
      // shared edge between (cx,cy) and (nx,ny)
      double ax, ay, bx, by;
      if (dx[k] != 0) {
        const double ex = std::max(cx, nx) * s;
        ax = ex, bx = ex, ay = cy * s, by = (cy + 1) * s;
      } else {
        const double ey = std::max(cy, ny) * s;
        ay = ey, by = ey, ax = cx * s, bx = (cx + 1) * s;
      }
      if (edge_blocked(maze, ax, ay, bx, by)) continue;
      seen[ny * n + nx] = 1;
      stack.push_back(ny * n + nx);
    }
  }
  return count;
}

double ray_distance(const MazeSpec& maze, double x, double y, double angle) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : maze.walls) best = std::min(best, ray_segment_distance(x, y, dx, dy, w));
  return best;
}

LidarScan raycast(const MazeSpec& maze, const Pose& pose) {
  require(pose.x >= 0.0 && pose.x <= 1.0 && pose.y >= 0.0 && pose.y <= 1.0,
          ErrorCode::invalid_argument, "pose outside bounds");
  LidarScan scan;
  for (int k = 0; k < kNumBeams; ++k) {
    const double d = ray_distance(maze, pose.x, pose.y, pose.theta + k * kBeamStep);
    scan.readings[k] = std::min(kMaxRange, d);
  }
  return scan;
}

Pose step(const MazeSpec& maze, const Pose& pose, const Control& control) {
  require(std::isfinite(control.dtheta) && std::isfinite(control.forward),
          ErrorCode::invalid_argument, "control must be finite");
  require(std::fabs(control.forward) <= kMaxForward, ErrorCode::invalid_argument,
          "forward exceeds maximum step length");
  Pose out = pose;
  out.theta = wrap_angle(pose.theta + control.dtheta);
  const double f = control.forward;
  if (f != 0.0) {
    const double dir = out.theta + (f > 0.0 ? 0.0 : kPi);
    const double free = ray_distance(maze, out.x, out.y, dir);
    const double travel = std::min(std::fabs(f), std::max(0.0, free - kAgentRadius));
    out.x += travel * std::cos(dir);
    out.y += travel * std::sin(dir);
  }
  return out;
}

Rollout rollout(const MazeSpec& maze, const Pose& start, const std::vector<Control>& controls) {
  Rollout r;
  r.poses.reserve(controls.size() + 1);
  r.scans.reserve(controls.size() + 1);
  r.poses.push_back(start);
  r.scans.push_back(raycast(maze, start));
  for (const auto& u : controls) {
    r.poses.push_back(step(maze, r.poses.back(), u));
    r.scans.push_back(raycast(maze, r.poses.back()));
  }
  return r;
}

Control RandomWalkPolicy::next(Rng& rng, const LidarScan& scan) {
  wander_ = cfg_.smooth * wander_ + (1.0 - cfg_.smooth) * cfg_.noise_std * rng.normal();
  double dtheta = wander_;

  int min_k = 0;
  for (int k = 1; k < kNumBeams; ++k)
    if (scan.readings[k] < scan.readings[min_k]) min_k = k;
  const double min_r = scan.readings[min_k];
  if (min_r < cfg_.avoid_distance) {
    const double rel = wrap_angle(min_k * kBeamStep);
    if (!avoiding_) {
      // pick a persistent escape side when the threat is dead ahead/behind
      avoid_sign_ = (rng.next_u64() & 1) ? 1 : -1;
      avoiding_ = true;
    }
    const int sign = (std::fabs(rel) < 1e-9 || std::fabs(std::fabs(rel) - kPi) < 1e-9)
                         ? avoid_sign_
                         : (rel > 0.0 ? -1 : 1);
    const double strength = (cfg_.avoid_distance - min_r) / cfg_.avoid_distance;
    dtheta += sign * strength * cfg_.avoid_gain;
  } else {
    avoiding_ = false;
  }
  dtheta = std::clamp(dtheta, -cfg_.max_dtheta, cfg_.max_dtheta);
  return Control{dtheta, cfg_.forward};
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_maze(const MazeSpec& maze, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["seed"] = maze.seed;
  j["complexity"] = complexity_name(maze.complexity);
  j["side_cells"] = maze.side_cells;
  json walls = json::array();
  for (const auto& w : maze.walls) walls.push_back({w.x1, w.y1, w.x2, w.y2});
  j["walls"] = walls;
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

MazeSpec load_maze(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open maze file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::io, "bad maze file " + path + ": " + e.what());
  }
  MazeSpec maze;
  maze.seed = j.at("seed").get<uint64_t>();
  maze.complexity = complexity_from_string(j.at("complexity").get<std::string>());
  maze.side_cells = j.at("side_cells").get<int>();
  for (const auto& w : j.at("walls"))
    maze.walls.push_back({w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(),
                          w.at(3).get<double>()});
  return maze;
}

void save_trajectory(const Trajectory& traj, const std::string& path) {
  require(traj.poses.size() == traj.scans.size() && traj.poses.size() == traj.controls.size() + 1,
          ErrorCode::invalid_argument, "inconsistent trajectory lengths");
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << "t,x,y,theta,u_dtheta,u_forward";
  for (int k = 0; k < kNumBeams; ++k) out << ",scan_" << k;
  out << "\n";
  for (size_t t = 0; t < traj.poses.size(); ++t) {
    out << t << "," << format_double(traj.poses[t].x) << "," << format_double(traj.poses[t].y)
        << "," << format_double(traj.poses[t].theta) << ",";
    if (t < traj.controls.size())
      out << format_double(traj.controls[t].dtheta) << ","
          << format_double(traj.controls[t].forward);
    else
      out << ",";
    for (int k = 0; k < kNumBeams; ++k) out << "," << format_double(traj.scans[t].readings[k]);
    out << "\n";
  }
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

Trajectory load_trajectory(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open trajectory file: " + path);
  Trajectory traj;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io, "empty trajectory file");
  bool pending_control = false;
  Control pending{};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(cells.size() == 6 + kNumBeams, ErrorCode::io, "bad trajectory row: " + line);
    if (pending_control) traj.controls.push_back(pending);
    Pose p{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])};
    traj.poses.push_back(p);
    LidarScan s;
    for (int k = 0; k < kNumBeams; ++k) s.readings[k] = std::stod(cells[6 + k]);
    traj.scans.push_back(s);
    if (!cells[4].empty() && !cells[5].empty()) {
      pending = Control{std::stod(cells[4]), std::stod(cells[5])};
      pending_control = true;
    } else {
      pending_control = false;
    }
  }
  require(traj.poses.size() == traj.controls.size() + 1, ErrorCode::io,
          "trajectory controls/poses mismatch");
  return traj;
}

}  // namespace latmap::sim
