#pragma once

#include <array>
#include <span>
#include <vector>

#include "latmap/geometry.hpp"
#include "latmap/nn.hpp"
#include "latmap/rng.hpp"
#include "latmap/sim2d.hpp"

namespace latmap::gm {

// One realised map: a w x h grid of d-dimensional cells over the unit square.
struct MapRealization {
  int w = 0, h = 0, d = 0;
  std::vector<double> cells;  // ((iy * w) + ix) * d + c

  static MapRealization zeros(int w, int h, int d);
  std::span<double> cell(int ix, int iy);
  std::span<const double> cell(int ix, int iy) const;
};

// Bilinear attention over the four cells around a position. Cell (ix, iy) is
// centred at ((ix + 0.5)/w, (iy + 0.5)/h); coordinates outside the centre
// lattice clamp, so the weights are a partition of unity on all of [0,1]^2.
struct BilinearWeights {
  int ix0 = 0, iy0 = 0;  // cells: (ix0, iy0), (ix0+1, iy0), (ix0, iy0+1), (ix0+1, iy0+1)
  std::array<double, 4> w{};
  std::array<double, 4> dwdx{}, dwdy{};
};

BilinearWeights attention_weights(double x, double y, int grid_w, int grid_h);

std::vector<double> attend(const MapRealization& map, const Pose& pose);
void attend_into(const MapRealization& map, double x, double y, std::span<double> chart,
                 BilinearWeights* wts = nullptr);

// Gaussian emission: dense net chart -> 20 raw outputs, logistic output head
// into [0, kMaxRange], then a circular shift by heading/(2*pi/20) beams with
// linear interpolation between neighbouring beams.
struct EmissionModel {
  nn::DenseNet net;
  double sigma_e = 0.1;
};

EmissionModel make_emission_model(int d_m, const std::vector<int>& hidden, double sigma_e,
                                  Rng& rng);

std::array<double, sim::kNumBeams> circular_shift(const std::array<double, sim::kNumBeams>& canon,
                                                  double shift_beams);

// Forward record for a single emission evaluation.
struct EmissionEval {
  nn::Tape tape;
  std::array<double, sim::kNumBeams> raw{}, canonical{}, mean{};
  double heading = 0.0;
};

void emission_forward(const EmissionModel& model, std::span<const double> chart, double heading,
                      EmissionEval& eval);
sim::LidarScan emission_mean(const EmissionModel& model, std::span<const double> chart,
                             double heading);

double emission_logpdf(const EmissionModel& model, const EmissionEval& eval,
                       const sim::LidarScan& obs);
double emission_logpdf(const EmissionModel& model, std::span<const double> chart, double heading,
                       const sim::LidarScan& obs);

// Backward of scale * logpdf through the head, shift and net. chart_grad and
// param_grads accumulate; heading_grad may be null.
void emission_logpdf_backward(const EmissionModel& model, const EmissionEval& eval,
                              const sim::LidarScan& obs, double scale,
                              std::span<double> chart_grad, nn::NetGrads* param_grads,
                              double* heading_grad);

// Backward from an arbitrary gradient w.r.t. the (shifted) mean.
void emission_mean_backward(const EmissionModel& model, const EmissionEval& eval,
                            std::span<const double> mean_grad, std::span<double> chart_grad,
                            nn::NetGrads* param_grads, double* heading_grad);

struct TransitionModel {
  enum class Variant { engineered, learned };
  Variant variant = Variant::engineered;
  nn::DenseNet net;  // learned variant: (x, y, cos, sin, u, mu_E) -> pose delta
  double sigma_t = 0.0;
  double margin = sim::kAgentRadius;
};

TransitionModel make_learned_transition(const std::vector<int>& hidden, double sigma_t, Rng& rng);

// Rotate, then move forward while the (interpolated) predicted reading along
// the new heading allows it.
Pose transition_engineered(const Pose& pose, const sim::Control& u,
                           const sim::LidarScan& predicted, double margin = sim::kAgentRadius);

// Free-space kinematics; the smooth differentiable variant used for
// candidate-control optimisation.
Pose transition_smooth(const Pose& pose, const sim::Control& u);

Pose transition_learned_mean(const TransitionModel& model, const Pose& pose, const sim::Control& u,
                             std::span<const double> predicted_mean);

// Model-conditioned mean step: chart = attend(map, pose), predicted scan from
// the emission model, then the configured transition variant.
Pose transition_mean_in_model(const TransitionModel& model, const EmissionModel& emission,
                              const MapRealization& map, const Pose& pose, const sim::Control& u);
Pose transition_sample_in_model(const TransitionModel& model, const EmissionModel& emission,
                                const MapRealization& map, const Pose& pose, const sim::Control& u,
                                Rng& rng);

struct TransitionSample {
  Pose pose;
  sim::Control u;
  sim::LidarScan scan;
  Pose next;
};

struct TransitionTrainConfig {
  int epochs = 30;
  int batch = 64;
  double lr = 1e-3;
  double holdout_fraction = 0.1;
  uint64_t seed = 0;
};

struct TransitionTrainReport {
  double final_holdout_rmse = 0.0;       // position RMSE on held-out steps
  std::vector<double> epoch_train_loss;  // mean squared delta error
};

TransitionTrainReport train_transition(TransitionModel& model,
                                       const std::vector<TransitionSample>& data,
                                       const TransitionTrainConfig& cfg);

struct AncestralResult {
  std::vector<Pose> poses;        // poses 1..T after each control
  std::vector<double> obs_concat; // T * 20 sampled observations
};

// Ancestral sampling of T future observations for the given controls. Noise
// for both the transition and the emission comes from `rng`.
AncestralResult ancestral_sample(const MapRealization& map, const Pose& start,
                                 std::span<const sim::Control> controls,
                                 const TransitionModel& transition, const EmissionModel& emission,
                                 Rng& rng);

}  // namespace latmap::gm
