#pragma once

#include <functional>
#include <span>
#include <vector>

#include "latmap/genmodel.hpp"
#include "latmap/geometry.hpp"
#include "latmap/rng.hpp"
#include "latmap/sim2d.hpp"

namespace latmap::nav {

struct SafetyParams {
  double mu = 1e4;
  double delta = 0.03;
  double sigma = 1e2;
};

// sum_i mu / (1 + exp((l_i - delta) * sigma))
double safety_penalty(const sim::LidarScan& predicted, const SafetyParams& params);

struct Plan {
  std::vector<sim::Control> controls;
  std::vector<Pose> predicted_poses;
  double cost = 0.0;
  int expanded_nodes = 0;
};

struct PlannerConfig {
  double cell_size = 1.0 / 40.0;
  int primitives = 8;        // E random primitives per expansion
  int primitive_steps = 3;   // K steps per primitive
  double primitive_dtheta = 0.4;
  double primitive_jitter = 0.1;
  double forward = 0.01;
  double goal_tolerance = 0.02;
  int max_expansions = 60000;
  SafetyParams safety;
  bool use_safety = true;
  uint64_t seed = 0;
};

// One expansion primitive: the reached state, the controls that got there,
// and the edge cost split into travel distance and safety penalty.
struct Successor {
  Pose state;
  std::vector<sim::Control> controls;
  double travel = 0.0;
  double safety = 0.0;
};

using ExpandFn = std::function<std::vector<Successor>(const Pose&, Rng&)>;

// A* over the discretised grid with continuous anchor states. Generic core so
// tests can plug in oracle primitives.
Plan hybrid_astar_generic(const Pose& start, const Vec2& goal, double goal_tolerance,
                          double cell_size, int max_expansions, const ExpandFn& expand,
                          uint64_t seed);

// Production planner: expansion through the model's transition mean on the
// posterior-mean map, edge cost = travel distance + safety penalty at the new
// state.
Plan hybrid_astar(const gm::EmissionModel& emission, const gm::TransitionModel& transition,
                  const gm::MapRealization& mean_map, const Pose& start, const Vec2& goal,
                  const PlannerConfig& cfg);

// Replays the plan in the true simulator; success iff the final position is
// within 0.05 of the target.
struct ExecutionResult {
  Pose final_pose;
  bool success = false;
};

inline constexpr double kSuccessRadius = 0.05;

ExecutionResult execute_plan(const sim::MazeSpec& maze, const Pose& start, const Plan& plan,
                             const Vec2& target);

struct PoseFitConfig {
  int position_grid_x = 4;  // stratified 4 x 2 position starts
  int position_grid_y = 2;
  int headings = 8;
  int iterations = 200;
  double lr = 0.03;
};

struct PoseFit {
  Pose pose;
  double logpdf = 0.0;
  double runner_up_logpdf = 0.0;  // best optimum further than 0.05 from the winner
};

// Multi-start gradient ascent of the emission likelihood over (x, y, theta);
// replaces the paper's VAE encoder for observation targets.
PoseFit pose_from_observation(const sim::LidarScan& obs, const gm::EmissionModel& emission,
                              const gm::MapRealization& mean_map, const PoseFitConfig& cfg);

}  // namespace latmap::nav
