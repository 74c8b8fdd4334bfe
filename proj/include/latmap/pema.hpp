#pragma once

#include <span>
#include <string>
#include <vector>

#include "latmap/nn.hpp"
#include "latmap/rng.hpp"
#include "latmap/sim2d.hpp"

namespace latmap::pema {

// LSTM exploration baseline: scan history -> angular velocity, constant
// forward offset.
struct PemaPolicy {
  nn::LstmCellParams lstm;
  std::vector<double> head_w;  // hidden -> 1
  double head_b = 0.0;
  double forward_offset = 0.01;
};

PemaPolicy make_policy(int hidden, Rng& rng);

// Stateful per-rollout wrapper (LSTM hidden state).
class PolicyRunner {
 public:
  explicit PolicyRunner(const PemaPolicy& policy);
  sim::Control next(const sim::LidarScan& scan);

 private:
  const PemaPolicy& policy_;
  nn::LstmState state_;
};

// Executes `steps` environment steps, the first with a zero control, feeding
// each new scan into the policy. Returns the ground-truth pose list.
std::vector<Pose> pema_rollout(const PemaPolicy& policy, const sim::MazeSpec& maze,
                               const Pose& start, int steps);

// Negative count of distinct visited grid cells.
double pema_loss(std::span<const Pose> poses, int tiles_per_side);

struct ArsConfig {
  int k_pert = 1;
  double sigma_pert = 0.0075;
  double eta = 0.001;
  int rollout_steps = 200;
  int reward_tiles = 20;
  int iterations = 120;
  uint64_t seed = 0;
};

struct ArsReport {
  std::vector<double> mean_reward;  // per iteration, averaged over +/- rollouts
};

// Augmented random search over the flattened policy parameters; rewards are
// visited-cell counts summed over the training worlds, random start poses per
// evaluation pair.
ArsReport ars_train(PemaPolicy& policy, const std::vector<sim::MazeSpec>& worlds,
                    const ArsConfig& cfg, Rng& rng);

// Samples a free pose: position at least `clearance` from every wall.
Pose random_free_pose(const sim::MazeSpec& maze, double clearance, Rng& rng);

void save_policy(const PemaPolicy& policy, const std::string& path);
PemaPolicy load_policy(const std::string& path);

}  // namespace latmap::pema
