#pragma once

#include <span>
#include <vector>

#include "latmap/genmodel.hpp"
#include "latmap/rng.hpp"
#include "latmap/sim2d.hpp"
#include "latmap/slam.hpp"

namespace latmap::explore {

struct EntropyConfig {
  int k = 3;
};

// Kozachenko-Leonenko estimator in nats. Duplicate points are floored at
// distance 1e-12.
double knn_entropy(const std::vector<std::vector<double>>& samples, const EntropyConfig& cfg);

struct MiConfig {
  int horizon = 25;
  int marginal_samples = 16;     // L
  int map_samples = 16;          // M
  int conditional_samples = 48;  // K
  int candidates = 16;           // F
  // Every entropy evaluation uses min(L, K) samples so the estimator bias
  // matches between the marginal and conditional terms.
  bool bias_matched = true;
  EntropyConfig entropy;
  double sigma_t = 4e-4;
};

// Nested kNN estimate of I(X_{1:T}; M | u). Sample index i reuses the same
// emission/transition noise stream in the marginal set and in every
// conditional set (common random numbers), so a map-independent model scores
// exactly zero.
double estimate_mi(const gm::EmissionModel& emission, const gm::TransitionModel& transition,
                   const slam::LatentMapPosterior& posterior, const Pose& start,
                   std::span<const sim::Control> controls, const MiConfig& cfg, Rng rng);

// Gridded log-density of predicted obstacle endpoints with bilinear
// interpolation between cell centres.
struct ObstacleField {
  int w = 64, h = 64;
  std::vector<double> log_density;  // iy * w + ix

  double value(double x, double y) const;
  void value_grad(double x, double y, double* value, double* dx, double* dy) const;
};

inline constexpr double kObstacleFloor = 1e-6;
// Predicted readings at or above this are treated as "no obstacle measured".
inline constexpr double kEndpointCutoff = 0.52;

ObstacleField uniform_field(int w, int h);

ObstacleField build_obstacle_field(std::span<const Pose> pose_estimates,
                                   const gm::EmissionModel& emission,
                                   const gm::MapRealization& mean_map, int w = 64, int h = 64);

struct CandidateConfig {
  int opt_steps = 500;
  double lr = 1e-3;
  double angle_reg = 2.0;
  double init_dtheta_std = 0.3;
  double forward = 0.01;
};

// F control sequences, each Adam-optimised against the obstacle field plus the
// heading regulariser, with gradients through the smooth rollout.
std::vector<std::vector<sim::Control>> generate_candidates(const ObstacleField& field,
                                                           const Pose& start, int n_candidates,
                                                           int horizon,
                                                           const CandidateConfig& cfg, Rng& rng);

// argmax; ties resolved to the lowest index.
size_t select_best(std::span<const double> mi_scores);

double infogain_metric(const slam::LatentMapPosterior& posterior);

// Fraction of tiles (half-open binning) containing at least one pose.
double exploration_ratio(std::span<const Pose> poses, int tiles_per_side);

struct ExploreCycleRecord {
  int cycle = 0;
  int steps_executed = 0;
  double infogain = 0.0;
  double exploration_ratio = 0.0;
  double selected_mi = 0.0;
  std::vector<double> candidate_mis;
};

struct ExploreConfig {
  MiConfig mi;
  CandidateConfig candidates;
  int n_train = 150;       // SLAM training steps per cycle
  int eval_tiles = 6;
  int field_w = 64, field_h = 64;
  int threads = 4;         // parallel MI scoring
};

// MI-driven active-SLAM loop: build field, optimise candidates, score MI,
// execute the best sequence, extend the engine's dataset, train.
std::vector<ExploreCycleRecord> explore_loop(const sim::MazeSpec& maze, const Pose& start,
                                             slam::SlamEngine& engine, const ExploreConfig& cfg,
                                             int budget_steps, Rng& rng,
                                             std::vector<Pose>* true_poses_out = nullptr);

}  // namespace latmap::explore
