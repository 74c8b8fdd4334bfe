#include "latmap/slam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "latmap/error.hpp"

namespace latmap::slam {

using sim::kNumBeams;

LatentMapPosterior LatentMapPosterior::standard_normal(int w, int h, int d) {
  LatentMapPosterior p;
  p.w = w;
  p.h = h;
  p.d = d;
  p.mu.assign(static_cast<size_t>(w) * h * d, 0.0);
  p.log_sigma2.assign(p.mu.size(), 0.0);
  return p;
}

gm::MapRealization LatentMapPosterior::mean_map() const {
  gm::MapRealization m = gm::MapRealization::zeros(w, h, d);
  m.cells = mu;
  return m;
}

MapSample sample_map(const LatentMapPosterior& post, Rng& rng) {
  MapSample s;
  s.map = gm::MapRealization::zeros(post.w, post.h, post.d);
  s.eps.resize(post.size());
  for (size_t i = 0; i < post.size(); ++i) {
    s.eps[i] = rng.normal();
    s.map.cells[i] = post.mu[i] + std::exp(0.5 * post.log_sigma2[i]) * s.eps[i];
  }
  return s;
}

double map_kl(const LatentMapPosterior& post) {
  double kl = 0.0;
  for (size_t i = 0; i < post.size(); ++i) {
    const double mu = post.mu[i];
    const double ls = post.log_sigma2[i];
    kl += 0.5 * (mu * mu + std::exp(ls) - 1.0 - ls);
  }
  return kl;
}

void map_kl_backward(const LatentMapPosterior& post, double scale, std::span<double> mu_grad,
                     std::span<double> log_sigma2_grad) {
  require(mu_grad.size() == post.size() && log_sigma2_grad.size() == post.size(),
          ErrorCode::invalid_argument, "gradient buffer size mismatch");
  for (size_t i = 0; i < post.size(); ++i) {
    mu_grad[i] += scale * post.mu[i];
    log_sigma2_grad[i] += scale * 0.5 * (std::exp(post.log_sigma2[i]) - 1.0);
  }
}

PoseProposal proposal_from_particles(std::span<const Pose> particles) {
  require(particles.size() >= 2, ErrorCode::invalid_argument,
          "proposal needs at least two particles");
  const double n = static_cast<double>(particles.size());
  double mx = 0.0, my = 0.0, mc = 0.0, ms = 0.0;
  for (const auto& p : particles) {
    mx += p.x;
    my += p.y;
    mc += std::cos(p.theta);
    ms += std::sin(p.theta);
  }
  mx /= n;
  my /= n;
  PoseProposal prop;
  prop.mean.x = mx;
  prop.mean.y = my;
  prop.mean.theta = std::atan2(ms, mc);
  double vx = 0.0, vy = 0.0, vt = 0.0;
  for (const auto& p : particles) {
    vx += (p.x - mx) * (p.x - mx);
    vy += (p.y - my) * (p.y - my);
    const double dt = wrap_angle(p.theta - prop.mean.theta);
    vt += dt * dt;
  }
  constexpr double kVarFloor = 1e-8;
  prop.var_x = std::max(kVarFloor, vx / n);
  prop.var_y = std::max(kVarFloor, vy / n);
  prop.var_theta = std::max(kVarFloor, vt / n);
  return prop;
}

Pose sample_proposal(const PoseProposal& prop, Rng& rng) {
  Pose p;
  p.x = prop.mean.x + std::sqrt(prop.var_x) * rng.normal();
  p.y = prop.mean.y + std::sqrt(prop.var_y) * rng.normal();
  p.theta = wrap_angle(prop.mean.theta + std::sqrt(prop.var_theta) * rng.normal());
  return p;
}

std::vector<double> normalize_log_weights(std::span<const double> log_weights) {
  require(!log_weights.empty(), ErrorCode::invalid_argument, "no weights to normalize");
  double max_lw = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights)
    if (std::isfinite(lw)) max_lw = std::max(max_lw, lw);
  if (!std::isfinite(max_lw))
    fail(ErrorCode::degenerate_weights, "all importance weights are degenerate");
  std::vector<double> w(log_weights.size());
  double sum = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] = std::isfinite(log_weights[i]) ? std::exp(log_weights[i] - max_lw) : 0.0;
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

std::vector<double> importance_weights(std::span<const Pose> samples, const sim::LidarScan& obs,
                                       const gm::MapRealization& map,
                                       const gm::EmissionModel& emission) {
  require(!samples.empty(), ErrorCode::invalid_argument, "importance_weights needs samples");
  std::vector<double> logw(samples.size());
  std::vector<double> chart(map.d);
  for (size_t i = 0; i < samples.size(); ++i) {
    gm::attend_into(map, samples[i].x, samples[i].y, chart);
    logw[i] = gm::emission_logpdf(emission, chart, samples[i].theta, obs);
  }
  return normalize_log_weights(logw);
}

std::vector<size_t> systematic_resample(std::span<const double> weights, size_t count, Rng& rng) {
  require(!weights.empty() && count > 0, ErrorCode::invalid_argument, "nothing to resample");
  std::vector<size_t> idx(count);
  const double u0 = rng.uniform();
  double cdf = weights[0];
  size_t j = 0;
  for (size_t i = 0; i < count; ++i) {
    const double u = (static_cast<double>(i) + u0) / static_cast<double>(count);
    while (u > cdf && j + 1 < weights.size()) cdf += weights[++j];
    idx[i] = j;
  }
  return idx;
}

ElboTerms per_step_loss(const gm::EmissionModel& emission, const gm::MapRealization& map,
                        const LatentMapPosterior& post, const Pose& pose,
                        const sim::LidarScan& obs, int total_steps) {
  require(total_steps >= 1, ErrorCode::invalid_argument, "total_steps must be positive");
  ElboTerms terms;
  std::vector<double> chart(map.d);
  gm::attend_into(map, pose.x, pose.y, chart);
  terms.recon = -gm::emission_logpdf(emission, chart, pose.theta, obs);
  terms.map_kl = map_kl(post) / total_steps;
  terms.pose_kl = 0.0;
  return terms;
}

namespace {

double gaussian_logpdf_1d(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * kPi * var) - 0.5 * d * d / var;
}

}  // namespace

ElboTerms per_step_loss(const gm::EmissionModel& emission, const gm::MapRealization& map,
                        const LatentMapPosterior& post, const Pose& pose,
                        const sim::LidarScan& obs, int total_steps, const Pose& prev,
                        const sim::Control& u, const gm::TransitionModel& transition,
                        const PoseProposal& proposal) {
  ElboTerms terms = per_step_loss(emission, map, post, pose, obs, total_steps);
  if (transition.sigma_t <= 0.0) return terms;  // degenerate transition: Z_t recorded as 0
  const double log_q = gaussian_logpdf_1d(pose.x, proposal.mean.x, proposal.var_x) +
                       gaussian_logpdf_1d(pose.y, proposal.mean.y, proposal.var_y) +
                       gaussian_logpdf_1d(wrap_angle(pose.theta - proposal.mean.theta), 0.0,
                                          proposal.var_theta);
  const Pose mean = gm::transition_mean_in_model(transition, emission, map, prev, u);
  const double var = transition.sigma_t * transition.sigma_t;
  const double log_p = gaussian_logpdf_1d(pose.x, mean.x, var) +
                       gaussian_logpdf_1d(pose.y, mean.y, var) +
                       gaussian_logpdf_1d(wrap_angle(pose.theta - mean.theta), 0.0, var);
  terms.pose_kl = log_q - log_p;
  return terms;
}

SlamEngine::SlamEngine(const SlamConfig& cfg, const Pose& start, const sim::LidarScan& first_obs)
    : cfg_(cfg), start_(start), rng_(cfg.seed ^ 0x736c616dULL) {
  emission_ = gm::make_emission_model(cfg.map_d, cfg.emission_hidden, cfg.sigma_e, rng_);
  transition_.variant = gm::TransitionModel::Variant::engineered;
  transition_.sigma_t = cfg.sigma_t;
  posterior_ = LatentMapPosterior::standard_normal(cfg.map_w, cfg.map_h, cfg.map_d);

  particles_.assign(cfg.n_particles, start);
  cache_.sets.push_back(particles_);
  cache_.refreshed_at.push_back(0);
  estimates_.push_back(start);
  observations_.push_back(first_obs);

  size_t n_params = 2 * posterior_.size();
  if (cfg.learn_emission) n_params += emission_.net.param_count();
  adam_ = std::make_unique<nn::Adam>(n_params, nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  mu_grad_.assign(posterior_.size(), 0.0);
  ls_grad_.assign(posterior_.size(), 0.0);
  emission_grads_.init_like(emission_.net);
}

Pose SlamEngine::propagate_one(const Pose& p, const sim::Control& u,
                               const gm::MapRealization& map, bool with_noise, Rng& rng) const {
  sim::Control uu = u;
  if (with_noise) {
    uu.dtheta += cfg_.prop_noise_dtheta * rng.normal();
    uu.forward += cfg_.prop_noise_forward * rng.normal();
  }
  Pose out = gm::transition_sample_in_model(transition_, emission_, map, p, uu, rng);
  out.x = std::clamp(out.x, 1e-6, 1.0 - 1e-6);
  out.y = std::clamp(out.y, 1e-6, 1.0 - 1e-6);
  return out;
}

Pose SlamEngine::weighted_mean(std::span<const Pose> particles,
                               std::span<const double> weights) const {
  Pose mean;
  double c = 0.0, s = 0.0;
  for (size_t i = 0; i < particles.size(); ++i) {
    mean.x += weights[i] * particles[i].x;
    mean.y += weights[i] * particles[i].y;
    c += weights[i] * std::cos(particles[i].theta);
    s += weights[i] * std::sin(particles[i].theta);
  }
  mean.theta = std::atan2(s, c);
  return mean;
}

void SlamEngine::observe(const sim::Control& commanded, const sim::LidarScan& obs) {
  controls_.push_back(commanded);
  const MapSample ms = sample_map(posterior_, rng_);
  for (auto& p : particles_) p = propagate_one(p, commanded, ms.map, true, rng_);
  std::vector<double> weights;
  try {
    weights = importance_weights(particles_, obs, ms.map, emission_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate_weights) throw;
    // reinitialize with jitter around the previous estimate
    for (auto& p : particles_) {
      p.x = std::clamp(p.x + 0.01 * rng_.normal(), 1e-6, 1.0 - 1e-6);
      p.y = std::clamp(p.y + 0.01 * rng_.normal(), 1e-6, 1.0 - 1e-6);
      p.theta = wrap_angle(p.theta + 0.05 * rng_.normal());
    }
    weights.assign(particles_.size(), 1.0 / particles_.size());
  }
  estimates_.push_back(weighted_mean(particles_, weights));
  const std::vector<size_t> idx = systematic_resample(weights, particles_.size(), rng_);
  std::vector<Pose> resampled(particles_.size());
  for (size_t i = 0; i < idx.size(); ++i) resampled[i] = particles_[idx[i]];
  particles_ = std::move(resampled);
  observations_.push_back(obs);
  cache_.sets.push_back(particles_);
  cache_.refreshed_at.push_back(minibatches_done_);
  train_minibatches(cfg_.updates_per_step);
}

void SlamEngine::refresh_particles() {
  const int T = num_steps();
  if (T < 2) return;
  const MapSample ms = sample_map(posterior_, rng_);
  std::vector<Pose> set(cfg_.n_particles, start_);
  cache_.sets[0] = set;
  cache_.refreshed_at[0] = minibatches_done_;
  int s = 0;
  while (s < T - 1) {
    std::vector<double> weights;
    try {
      weights = importance_weights(cache_.sets[s], observations_[s], ms.map, emission_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::degenerate_weights) throw;
      weights.assign(cache_.sets[s].size(), 1.0 / cache_.sets[s].size());
    }
    const std::vector<size_t> idx = systematic_resample(weights, cfg_.n_particles, rng_);
    std::vector<Pose> particles(cfg_.n_particles);
    for (size_t i = 0; i < idx.size(); ++i) particles[i] = cache_.sets[s][idx[i]];
    const int end = std::min(s + cfg_.chunk_len, T - 1);
    for (int t = s + 1; t <= end; ++t) {
      for (auto& p : particles) p = propagate_one(p, controls_[t - 1], ms.map, true, rng_);
      cache_.sets[t] = particles;
      cache_.refreshed_at[t] = minibatches_done_;
    }
    s = end;
  }
}

void SlamEngine::accumulate_chunk_loss(int chunk_start, const MapSample& ms, double scale,
                                       TrainReport& report) {
  const int T = num_steps();
  const std::vector<Pose>& set = cache_.sets[chunk_start];

  // draw the chunk-start pose from the cached proposal, importance-reweighted
  // against the current map sample
  std::vector<Pose> samples(cfg_.proposal_samples);
  if (offline_mode_ || set.size() < 2) {
    for (auto& z : samples) z = set[rng_.uniform_int(set.size())];
  } else {
    const PoseProposal prop = proposal_from_particles(set);
    for (auto& z : samples) {
      z = sample_proposal(prop, rng_);
      z.x = std::clamp(z.x, 1e-6, 1.0 - 1e-6);
      z.y = std::clamp(z.y, 1e-6, 1.0 - 1e-6);
    }
  }
  std::vector<double> weights;
  try {
    weights = importance_weights(samples, observations_[chunk_start], ms.map, emission_);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::degenerate_weights) throw;
    weights.assign(samples.size(), 1.0 / samples.size());
  }
  Pose pose = samples[systematic_resample(weights, 1, rng_)[0]];

  std::vector<double> chart(posterior_.d);
  std::vector<double> chart_grad(posterior_.d);
  gm::EmissionEval eval;
  const int chunk_end = std::min(chunk_start + cfg_.chunk_len, T);
  for (int t = chunk_start; t < chunk_end; ++t) {
    if (t > chunk_start) pose = propagate_one(pose, controls_[t - 1], ms.map, false, rng_);
    pose.x = std::clamp(pose.x, 1e-6, 1.0 - 1e-6);
    pose.y = std::clamp(pose.y, 1e-6, 1.0 - 1e-6);
    gm::BilinearWeights wts;
    gm::attend_into(ms.map, pose.x, pose.y, chart, &wts);
    gm::emission_forward(emission_, chart, pose.theta, eval);
    const double logpdf = gm::emission_logpdf(emission_, eval, observations_[t]);
    report.recon += -logpdf;
    ++report.steps_used;

    std::fill(chart_grad.begin(), chart_grad.end(), 0.0);
    gm::emission_logpdf_backward(emission_, eval, observations_[t], -scale, chart_grad,
                                 cfg_.learn_emission ? &emission_grads_ : nullptr, nullptr);
    const int ix[4] = {wts.ix0, wts.ix0 + 1, wts.ix0, wts.ix0 + 1};
    const int iy[4] = {wts.iy0, wts.iy0, wts.iy0 + 1, wts.iy0 + 1};
    for (int k = 0; k < 4; ++k) {
      const size_t base = (static_cast<size_t>(iy[k]) * posterior_.w + ix[k]) * posterior_.d;
      for (int c = 0; c < posterior_.d; ++c) {
        const double g = wts.w[k] * chart_grad[c];
        mu_grad_[base + c] += g;
        // d cell / d log_sigma2 = 0.5 * (cell - mu)
        ls_grad_[base + c] += g * 0.5 * (ms.map.cells[base + c] - posterior_.mu[base + c]);
      }
    }
  }
}

std::vector<double> SlamEngine::collect_posterior_gradient(std::span<const int> chunk_starts,
                                                           const MapSample& ms) {
  std::fill(mu_grad_.begin(), mu_grad_.end(), 0.0);
  std::fill(ls_grad_.begin(), ls_grad_.end(), 0.0);
  emission_grads_.zero();
  TrainReport report;
  for (int s : chunk_starts) accumulate_chunk_loss(s, ms, 1.0, report);
  std::vector<double> out = mu_grad_;
  if (report.steps_used > 0) {
    const double scale = static_cast<double>(num_steps()) / report.steps_used;
    for (auto& g : out) g *= scale;
  }
  return out;
}

TrainReport SlamEngine::train_minibatch() {
  TrainReport report;
  const int T = num_steps();
  if (T < 1) {
    report.skipped = true;
    return report;
  }
  if (!offline_mode_ && minibatches_done_ > 0 && cfg_.refresh_period > 0 &&
      minibatches_done_ % cfg_.refresh_period == 0 &&
      cache_.refreshed_at[0] + cfg_.refresh_period <= minibatches_done_)
    refresh_particles();

  const MapSample ms = sample_map(posterior_, rng_);
  std::fill(mu_grad_.begin(), mu_grad_.end(), 0.0);
  std::fill(ls_grad_.begin(), ls_grad_.end(), 0.0);
  emission_grads_.zero();

  const int n_chunks = (T + cfg_.chunk_len - 1) / cfg_.chunk_len;
  for (int b = 0; b < cfg_.batch_chunks; ++b) {
    const int chunk = static_cast<int>(rng_.uniform_int(static_cast<uint64_t>(n_chunks)));
    accumulate_chunk_loss(chunk * cfg_.chunk_len, ms, 1.0, report);
  }
  if (report.steps_used == 0) {
    report.skipped = true;
    return report;
  }

  const double batch_scale = static_cast<double>(T) / report.steps_used;
  for (auto& g : mu_grad_) g *= batch_scale;
  for (auto& g : ls_grad_) g *= batch_scale;
  emission_grads_.scale(batch_scale);
  map_kl_backward(posterior_, 1.0, mu_grad_, ls_grad_);

  report.map_kl = map_kl(posterior_);
  report.recon /= report.steps_used;
  report.loss = batch_scale * report.recon * report.steps_used + report.map_kl;

  std::vector<std::span<double>> params{std::span<double>(posterior_.mu),
                                        std::span<double>(posterior_.log_sigma2)};
  std::vector<std::span<const double>> grads{std::span<const double>(mu_grad_),
                                             std::span<const double>(ls_grad_)};
  if (cfg_.learn_emission) {
    for (auto v : emission_.net.param_views()) params.push_back(v);
    for (auto v : emission_grads_.views()) grads.push_back(v);
  }
  adam_->step(params, grads);
  ++minibatches_done_;
  return report;
}

int SlamEngine::train_minibatches(int n) {
  int done = 0;
  for (int i = 0; i < n; ++i) {
    const TrainReport r = train_minibatch();
    if (!r.skipped) ++done;
  }
  return done;
}

std::vector<Pose> SlamEngine::offline_sweep() {
  const int T = num_steps();
  const gm::MapRealization map = posterior_.mean_map();
  gm::EmissionModel pf_emission = emission_;
  pf_emission.sigma_e = cfg_.offline_sigma_e;

  std::vector<Pose> particles(cfg_.offline_particles, start_);
  std::vector<Pose> est(T);
  for (int t = 0; t < T; ++t) {
    if (t > 0)
      for (auto& p : particles) p = propagate_one(p, controls_[t - 1], map, true, rng_);
    if (t % cfg_.chunk_len == 0 && cfg_.offline_chunk_noise > 0.0)
      for (auto& p : particles) {
        p.x = std::clamp(p.x + cfg_.offline_chunk_noise * rng_.normal(), 1e-6, 1.0 - 1e-6);
        p.y = std::clamp(p.y + cfg_.offline_chunk_noise * rng_.normal(), 1e-6, 1.0 - 1e-6);
        p.theta = wrap_angle(p.theta + cfg_.offline_chunk_noise * rng_.normal());
      }
    std::vector<double> weights;
    try {
      weights = importance_weights(particles, observations_[t], map, pf_emission);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::degenerate_weights) throw;
      weights.assign(particles.size(), 1.0 / particles.size());
    }
    est[t] = weighted_mean(particles, weights);
    const std::vector<size_t> idx = systematic_resample(weights, particles.size(), rng_);
    std::vector<Pose> resampled(particles.size());
    for (size_t i = 0; i < idx.size(); ++i) resampled[i] = particles[idx[i]];
    particles = std::move(resampled);
    cache_.sets[t] = particles;
    cache_.refreshed_at[t] = minibatches_done_;
  }
  return est;
}

std::vector<Pose> offline_slam(SlamEngine& engine) {
  engine.set_offline_mode(true);
  const SlamConfig& cfg = engine.config();
  std::vector<Pose> est;
  for (int round = 0; round < cfg.offline_rounds; ++round) {
    engine.offline_sweep();
    engine.train_minibatches(cfg.offline_updates_per_round);
  }
  return engine.offline_sweep();
}

std::pair<double, double> localisation_error(std::span<const Pose> estimated,
                                             std::span<const Pose> truth) {
  require(estimated.size() == truth.size(), ErrorCode::invalid_argument,
          "trajectory length mismatch");
  require(!truth.empty(), ErrorCode::invalid_argument, "empty trajectories");
  double sum = 0.0;
  for (size_t t = 0; t < truth.size(); ++t)
    sum += std::hypot(estimated[t].x - truth[t].x, estimated[t].y - truth[t].y);
  const double mean_abs = sum / truth.size();
  double path = 0.0;
  for (size_t t = 1; t < truth.size(); ++t)
    path += std::hypot(truth[t].x - truth[t - 1].x, truth[t].y - truth[t - 1].y);
  const size_t last = truth.size() - 1;
  const double final_err = std::hypot(estimated[last].x - truth[last].x,
                                      estimated[last].y - truth[last].y);
  const double relative = path > 0.0 ? final_err / path : 0.0;
  return {mean_abs, relative};
}

}  // namespace latmap::slam
