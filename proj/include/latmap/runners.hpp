#pragma once

#include <string>
#include <vector>

#include "latmap/config.hpp"
#include "latmap/explore.hpp"
#include "latmap/navigate.hpp"
#include "latmap/pema.hpp"
#include "latmap/sim2d.hpp"
#include "latmap/slam.hpp"

namespace latmap::run {

// Random-walk data collection from a deterministic free start pose.
sim::Trajectory collect(const sim::MazeSpec& maze, int steps, uint64_t seed,
                        const RunConfig& cfg);

enum class SlamMode { online, offline };

struct SlamRunResult {
  std::vector<Pose> truth;      // re-executed with injected control noise
  std::vector<Pose> estimates;
  std::vector<Pose> dead_reckoning;
  std::vector<double> abs_err;  // per-step estimate error
  double final_abs_err = 0.0;
  double relative_err = 0.0;
  double dr_final_abs_err = 0.0;
  slam::LatentMapPosterior posterior;
  gm::EmissionModel emission;
};

// Re-executes the trajectory's commanded controls in the environment with
// Gaussian control noise (scaled by noise_scale, hidden from the agent), then
// runs the selected SLAM driver on (scans, commanded controls).
SlamRunResult slam_run(const sim::MazeSpec& maze, const sim::Trajectory& traj, SlamMode mode,
                       double noise_scale, uint64_t seed, const RunConfig& cfg);

void save_slam_result(const SlamRunResult& res, const std::string& path);
// Posterior dump plus the trained emission model (everything navigation needs).
void save_model_file(const slam::LatentMapPosterior& post, const gm::EmissionModel& emission,
                     const std::string& path);
void load_model_file(const std::string& path, slam::LatentMapPosterior* post,
                     gm::EmissionModel* emission);

enum class ExplorePolicy { mi, random, pema };

struct ExploreRunResult {
  std::vector<explore::ExploreCycleRecord> trace;
  std::vector<Pose> true_poses;
};

ExploreRunResult explore_run(const sim::MazeSpec& maze, ExplorePolicy policy, int budget,
                             uint64_t seed, const RunConfig& cfg,
                             const pema::PemaPolicy* pema_policy);

void save_explore_trace(const ExploreRunResult& res, const std::string& path);

struct NavigatePairResult {
  Pose start;
  Vec2 goal;
  bool planned = false;
  bool success = false;
  double final_distance = 0.0;
  double plan_cost = 0.0;
  int expanded_nodes = 0;
  // pose-to-observation extras
  double fit_logpdf = 0.0;
  double fit_runner_up = 0.0;
};

struct NavigateRunResult {
  std::vector<NavigatePairResult> pairs;
  double success_fraction = 0.0;
};

// Enumerates free poses on a 5x5 grid, plans with hybrid A* on the learned
// model, executes in the true simulator. With target_obs, the goal pose is
// first inferred from the target's observation.
NavigateRunResult navigate_run(const sim::MazeSpec& maze, const slam::LatentMapPosterior& post,
                               const gm::EmissionModel& emission, bool target_obs,
                               int max_pairs, uint64_t seed, const RunConfig& cfg);

void save_navigate_result(const NavigateRunResult& res, const std::string& path);

struct PemaTrainResult {
  pema::PemaPolicy policy;
  pema::ArsReport report;
};

PemaTrainResult pema_train_run(const std::vector<sim::MazeSpec>& worlds, int hidden,
                               int iterations, uint64_t seed, const RunConfig& cfg);

void save_pema_curve(const pema::ArsReport& report, const std::string& path);

// Deterministic free start pose for a maze (used by collect/explore/slam).
Pose default_start_pose(const sim::MazeSpec& maze, uint64_t seed);

// Report aggregation over SLAM result files (reads "abs_err" series).
void report_run(const std::vector<std::string>& result_paths, const std::string& out_json,
                const std::string& out_csv);

}  // namespace latmap::run
