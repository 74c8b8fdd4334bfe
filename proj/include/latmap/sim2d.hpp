#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "latmap/geometry.hpp"
#include "latmap/rng.hpp"

namespace latmap::sim {

inline constexpr int kNumBeams = 20;
inline constexpr double kMaxRange = 0.53;
inline constexpr double kBeamStep = 2.0 * kPi / kNumBeams;
inline constexpr double kAgentRadius = 1e-5;
inline constexpr double kMaxForward = 0.1;

enum class Complexity { simple, moderate, complex };

Complexity complexity_from_string(const std::string& name);
std::string complexity_name(Complexity c);

// Rotational velocity plus movement offset along the (new) heading.
struct Control {
  double dtheta = 0.0;
  double forward = 0.0;
};

struct LidarScan {
  std::array<double, kNumBeams> readings{};
};

// Axis-aligned maze in the unit square. The first four walls are always the
// unit-square boundary; internal walls follow in generation order.
struct MazeSpec {
  uint64_t seed = 0;
  Complexity complexity = Complexity::simple;
  int side_cells = 0;
  std::vector<Segment> walls;
};

// Recursive-division maze on a side_cells x side_cells lattice, scaled into
// the unit square. Pure function of its arguments.
MazeSpec generate_maze(uint64_t seed, Complexity complexity, int side_cells);

// Number of lattice cells reachable from cell (0,0); equals side_cells^2 for
// every generated maze.
int free_flood_fill_count(const MazeSpec& maze);

// True distance to the nearest wall along `angle` (no max-range clamp).
double ray_distance(const MazeSpec& maze, double x, double y, double angle);

// 20 beams, beam k at relative angle k*kBeamStep (counterclockwise, beam 0
// along the heading), clamped to kMaxRange.
LidarScan raycast(const MazeSpec& maze, const Pose& pose);

// Rotation first, then forward motion truncated by collisions.
Pose step(const MazeSpec& maze, const Pose& pose, const Control& control);

struct Rollout {
  std::vector<Pose> poses;
  std::vector<LidarScan> scans;
};

Rollout rollout(const MazeSpec& maze, const Pose& start, const std::vector<Control>& controls);

struct RandomWalkConfig {
  double forward = 0.01;
  double max_dtheta = 0.8;
  double smooth = 0.85;       // wander persistence
  double noise_std = 0.5;     // innovation scale before smoothing
  double avoid_distance = 0.15;
  double avoid_gain = 0.6;
};

// Smooth wall-avoiding wander; replaces the human-teleoperated data
// collection. Caller owns the rng stream.
class RandomWalkPolicy {
 public:
  RandomWalkPolicy() = default;
  explicit RandomWalkPolicy(const RandomWalkConfig& cfg) : cfg_(cfg) {}

  Control next(Rng& rng, const LidarScan& scan);

 private:
  RandomWalkConfig cfg_;
  double wander_ = 0.0;
  int avoid_sign_ = 1;
  bool avoiding_ = false;
};

// Maze JSON file: {"format_version","seed","complexity","side_cells","walls"}.
void save_maze(const MazeSpec& maze, const std::string& path);
MazeSpec load_maze(const std::string& path);

// Trajectory log. controls[t] is the control applied between poses[t] and
// poses[t+1]; controls.size() + 1 == poses.size() == scans.size().
struct Trajectory {
  std::vector<Pose> poses;
  std::vector<LidarScan> scans;
  std::vector<Control> controls;
};

void save_trajectory(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const std::string& path);

}  // namespace latmap::sim
