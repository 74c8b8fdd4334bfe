#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "latmap/genmodel.hpp"
#include "latmap/geometry.hpp"
#include "latmap/nn.hpp"
#include "latmap/rng.hpp"
#include "latmap/sim2d.hpp"

namespace latmap::slam {

// Mean-field Gaussian over the map grid; the variational q(M).
struct LatentMapPosterior {
  int w = 0, h = 0, d = 0;
  std::vector<double> mu;          // (iy*w + ix)*d + c
  std::vector<double> log_sigma2;

  static LatentMapPosterior standard_normal(int w, int h, int d);
  size_t size() const { return mu.size(); }
  gm::MapRealization mean_map() const;
};

// Reparameterised sample; eps is the tape that lets gradients reach mu and
// log_sigma2.
struct MapSample {
  gm::MapRealization map;
  std::vector<double> eps;
};

MapSample sample_map(const LatentMapPosterior& post, Rng& rng);

// KL(q(M) || N(0, I)), closed form.
double map_kl(const LatentMapPosterior& post);

// Accumulates scale * dKL into the gradient buffers.
void map_kl_backward(const LatentMapPosterior& post, double scale, std::span<double> mu_grad,
                     std::span<double> log_sigma2_grad);

// Moment-matched Normal proposal; heading moments on (cos, sin) then
// re-projected. Variances floored at 1e-8.
struct PoseProposal {
  Pose mean;
  double var_x = 0.0, var_y = 0.0, var_theta = 0.0;
};

PoseProposal proposal_from_particles(std::span<const Pose> particles);
Pose sample_proposal(const PoseProposal& prop, Rng& rng);

// log-sum-exp normalisation of log weights; throws degenerate_weights when no
// weight is finite.
std::vector<double> normalize_log_weights(std::span<const double> log_weights);

// Bootstrap importance weights: emission likelihood of obs at each sample.
std::vector<double> importance_weights(std::span<const Pose> samples, const sim::LidarScan& obs,
                                       const gm::MapRealization& map,
                                       const gm::EmissionModel& emission);

std::vector<size_t> systematic_resample(std::span<const double> weights, size_t count, Rng& rng);

// Per-step particle sets; sets at chunk starts are the training proposals.
struct ParticleCache {
  std::vector<std::vector<Pose>> sets;  // sets[t]
  std::vector<int64_t> refreshed_at;    // minibatch counter at last refresh
};

struct ElboTerms {
  double recon = 0.0;
  double pose_kl = 0.0;
  double map_kl = 0.0;
};

struct SlamConfig {
  int map_w = 32, map_h = 32, map_d = 10;
  std::vector<int> emission_hidden{64, 64};
  double sigma_e = 0.1;
  double sigma_t = 0.0;

  int chunk_len = 5;
  int batch_chunks = 16;
  double learning_rate = 1e-3;
  int n_particles = 50;
  int refresh_period = 50;   // minibatches between particle refreshes
  int updates_per_step = 25; // online training cadence
  int proposal_samples = 8;  // importance samples per chunk during training

  // Process noise applied when propagating particles; matches the control
  // noise the environment injects.
  double prop_noise_dtheta = 0.02;
  double prop_noise_forward = 0.002;

  // Offline particle filter
  int offline_particles = 300;
  double offline_chunk_noise = 0.001;
  double offline_sigma_e = 0.05;
  int offline_rounds = 6;
  int offline_updates_per_round = 500;

  bool learn_emission = true;
  uint64_t seed = 0;
};

// Per-step loss terms; R_t = -emission logpdf, M_t = map KL / T, Z_t only when
// sigma_t > 0 (otherwise recorded as 0).
ElboTerms per_step_loss(const gm::EmissionModel& emission, const gm::MapRealization& map,
                        const LatentMapPosterior& post, const Pose& pose,
                        const sim::LidarScan& obs, int total_steps);

// sigma_t > 0 variant: Z_t = log q_hat(z_t) - log p(z_t | z_{t-1}, u, M).
ElboTerms per_step_loss(const gm::EmissionModel& emission, const gm::MapRealization& map,
                        const LatentMapPosterior& post, const Pose& pose,
                        const sim::LidarScan& obs, int total_steps, const Pose& prev,
                        const sim::Control& u, const gm::TransitionModel& transition,
                        const PoseProposal& proposal);

struct TrainReport {
  double loss = 0.0;      // scaled subsampled loss
  double recon = 0.0;     // mean per-step reconstruction term
  double map_kl = 0.0;    // current KL(q || p)
  int steps_used = 0;
  bool skipped = false;
};

// Variational SLAM engine: owns the posterior, the emission model, the
// particle cache and the optimizer state. Single writer; see module docs.
class SlamEngine {
 public:
  SlamEngine(const SlamConfig& cfg, const Pose& start, const sim::LidarScan& first_obs);

  // Online filter step: propagate, weight against a fresh map sample,
  // estimate, resample, then cfg.updates_per_step training updates.
  void observe(const sim::Control& commanded, const sim::LidarScan& obs);

  TrainReport train_minibatch();
  int train_minibatches(int n);

  // Estimator diagnostic: the scaled reconstruction-loss gradient w.r.t. the
  // posterior means for the given chunk starts against a fixed map sample.
  // Advances the engine rng; takes no optimizer step.
  std::vector<double> collect_posterior_gradient(std::span<const int> chunk_starts,
                                                 const MapSample& ms);

  // Re-runs the chunk-granular particle sweep under a fresh map sample.
  void refresh_particles();

  const std::vector<Pose>& estimates() const { return estimates_; }
  Pose latest_estimate() const { return estimates_.back(); }
  int num_steps() const { return static_cast<int>(observations_.size()); }
  double infogain() const { return map_kl(posterior_); }

  const LatentMapPosterior& posterior() const { return posterior_; }
  const gm::EmissionModel& emission() const { return emission_; }
  gm::EmissionModel& emission() { return emission_; }
  const gm::TransitionModel& transition() const { return transition_; }
  const std::vector<sim::LidarScan>& observations() const { return observations_; }
  const std::vector<sim::Control>& controls() const { return controls_; }
  const ParticleCache& cache() const { return cache_; }
  const SlamConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

  // Offline mode plumbing: replace the per-step particle sets by a sequential
  // PF sweep (1000-particle style, categorical proposals, per-chunk noise) and
  // return the per-step weighted-mean estimates.
  std::vector<Pose> offline_sweep();
  void set_offline_mode(bool on) { offline_mode_ = on; }

 private:
  Pose propagate_one(const Pose& p, const sim::Control& u, const gm::MapRealization& map,
                     bool with_noise, Rng& rng) const;
  Pose weighted_mean(std::span<const Pose> particles, std::span<const double> weights) const;
  void accumulate_chunk_loss(int chunk_start, const MapSample& ms, double scale,
                             TrainReport& report);

  SlamConfig cfg_;
  Pose start_;
  gm::EmissionModel emission_;
  gm::TransitionModel transition_;
  LatentMapPosterior posterior_;
  ParticleCache cache_;
  std::vector<Pose> particles_;  // rolling filter set
  std::vector<Pose> estimates_;
  std::vector<sim::LidarScan> observations_;
  std::vector<sim::Control> controls_;
  Rng rng_;
  int64_t minibatches_done_ = 0;
  bool offline_mode_ = false;

  std::unique_ptr<nn::Adam> adam_;
  std::vector<double> mu_grad_, ls_grad_;
  nn::NetGrads emission_grads_;
};

// Offline SLAM driver: interleaves sequential PF sweeps with training rounds
// over the full sequence; returns the final sweep's per-step estimates.
std::vector<Pose> offline_slam(SlamEngine& engine);

// (mean absolute position error, final error / distance travelled)
std::pair<double, double> localisation_error(std::span<const Pose> estimated,
                                             std::span<const Pose> truth);

}  // namespace latmap::slam
