#include "latmap/explore.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>

#include "latmap/error.hpp"

namespace latmap::explore {

using sim::kNumBeams;

namespace {

// digamma via recurrence + asymptotic series
double digamma(double x) {
  require(x > 0.0, ErrorCode::invalid_argument, "digamma needs x > 0");
  double r = 0.0;
  while (x < 6.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  return r + std::log(x) - 0.5 * inv -
         inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
}

double log_unit_ball_volume(int d) {
  return 0.5 * d * std::log(kPi) - std::lgamma(0.5 * d + 1.0);
}

}  // namespace

double knn_entropy(const std::vector<std::vector<double>>& samples, const EntropyConfig& cfg) {
  const size_t n = samples.size();
  require(cfg.k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
  require(n > static_cast<size_t>(cfg.k), ErrorCode::invalid_argument,
          "need more samples than k");
  const size_t d = samples.front().size();
  require(d >= 1, ErrorCode::invalid_argument, "dimension must be >= 1");

  double sum_log_r = 0.0;
  std::vector<double> sq(n);
  for (size_t i = 0; i < n; ++i) {
    require(samples[i].size() == d, ErrorCode::invalid_argument, "ragged sample set");
    size_t m = 0;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double acc = 0.0;
      for (size_t c = 0; c < d; ++c) {
        const double diff = samples[i][c] - samples[j][c];
        acc += diff * diff;
      }
      sq[m++] = acc;
    }
    std::nth_element(sq.begin(), sq.begin() + (cfg.k - 1), sq.begin() + m);
    const double r = std::max(std::sqrt(sq[cfg.k - 1]), 1e-12);
    sum_log_r += std::log(r);
  }
  return digamma(static_cast<double>(n)) - digamma(static_cast<double>(cfg.k)) +
         log_unit_ball_volume(static_cast<int>(d)) +
         (static_cast<double>(d) / static_cast<double>(n)) * sum_log_r;
}

double estimate_mi(const gm::EmissionModel& emission, const gm::TransitionModel& transition,
                   const slam::LatentMapPosterior& posterior, const Pose& start,
                   std::span<const sim::Control> controls, const MiConfig& cfg, Rng rng) {
  require(!controls.empty(), ErrorCode::invalid_argument, "controls must match the horizon");
  const int n_ent = cfg.bias_matched
                        ? std::min(cfg.marginal_samples, cfg.conditional_samples)
                        : cfg.marginal_samples;
  const int n_cond = cfg.bias_matched ? n_ent : cfg.conditional_samples;

  gm::TransitionModel trans = transition;
  trans.sigma_t = cfg.sigma_t;

  Rng map_rng = rng.split(1);
  const Rng noise_base = rng.split(2);

  auto draw_set = [&](const gm::MapRealization* fixed_map, int count, Rng& map_stream) {
    std::vector<std::vector<double>> set;
    set.reserve(count);
    for (int i = 0; i < count; ++i) {
      // common random numbers: sample index i shares its noise stream across
      // the marginal set and every conditional set
      Rng noise = noise_base.split(static_cast<uint64_t>(i));
      if (fixed_map) {
        set.push_back(gm::ancestral_sample(*fixed_map, start, controls, trans, emission, noise)
                          .obs_concat);
      } else {
        const slam::MapSample ms = slam::sample_map(posterior, map_stream);
        set.push_back(
            gm::ancestral_sample(ms.map, start, controls, trans, emission, noise).obs_concat);
      }
    }
    return set;
  };

  const auto marginal = draw_set(nullptr, n_ent, map_rng);
  const double h_marginal = knn_entropy(marginal, cfg.entropy);

  double h_cond = 0.0;
  for (int m = 0; m < cfg.map_samples; ++m) {
    const slam::MapSample ms = slam::sample_map(posterior, map_rng);
    const auto cond = draw_set(&ms.map, n_cond, map_rng);
    h_cond += knn_entropy(cond, cfg.entropy);
  }
  h_cond /= cfg.map_samples;
  return h_marginal - h_cond;
}

namespace {

// shared bilinear read over cell centres with clamping (same convention as
// the map attention)
void bilinear_eval(const std::vector<double>& grid, int w, int h, double x, double y,
                   double* value, double* dx, double* dy) {
  const gm::BilinearWeights bw = gm::attention_weights(x, y, w, h);
  const int ix[4] = {bw.ix0, bw.ix0 + 1, bw.ix0, bw.ix0 + 1};
  const int iy[4] = {bw.iy0, bw.iy0, bw.iy0 + 1, bw.iy0 + 1};
  double v = 0.0, gx = 0.0, gy = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double cell = grid[static_cast<size_t>(iy[k]) * w + ix[k]];
    v += bw.w[k] * cell;
    gx += bw.dwdx[k] * cell;
    gy += bw.dwdy[k] * cell;
  }
  if (value) *value = v;
  if (dx) *dx = gx;
  if (dy) *dy = gy;
}

}  // namespace

double ObstacleField::value(double x, double y) const {
  double v = 0.0;
  bilinear_eval(log_density, w, h, std::clamp(x, 0.0, 1.0), std::clamp(y, 0.0, 1.0), &v, nullptr,
                nullptr);
  return v;
}

void ObstacleField::value_grad(double x, double y, double* value, double* dx, double* dy) const {
  bilinear_eval(log_density, w, h, std::clamp(x, 0.0, 1.0), std::clamp(y, 0.0, 1.0), value, dx,
                dy);
}

ObstacleField uniform_field(int w, int h) {
  ObstacleField f;
  f.w = w;
  f.h = h;
  f.log_density.assign(static_cast<size_t>(w) * h, std::log(kObstacleFloor));
  return f;
}

ObstacleField build_obstacle_field(std::span<const Pose> pose_estimates,
                                   const gm::EmissionModel& emission,
                                   const gm::MapRealization& mean_map, int w, int h) {
  require(!pose_estimates.empty(), ErrorCode::invalid_argument, "empty dataset");
  std::vector<double> counts(static_cast<size_t>(w) * h, 0.0);
  std::vector<double> chart(mean_map.d);
  for (const auto& pose : pose_estimates) {
    gm::attend_into(mean_map, std::clamp(pose.x, 0.0, 1.0), std::clamp(pose.y, 0.0, 1.0), chart);
    const sim::LidarScan predicted = gm::emission_mean(emission, chart, pose.theta);
    for (int k = 0; k < kNumBeams; ++k) {
      const double r = predicted.readings[k];
      if (r >= kEndpointCutoff) continue;  // saturated beam measured no obstacle
      const double angle = pose.theta + k * sim::kBeamStep;
      const double ex = pose.x + r * std::cos(angle);
      const double ey = pose.y + r * std::sin(angle);
      if (ex < 0.0 || ex >= 1.0 || ey < 0.0 || ey >= 1.0) continue;
      const int ix = std::min(w - 1, static_cast<int>(ex * w));
      const int iy = std::min(h - 1, static_cast<int>(ey * h));
      counts[static_cast<size_t>(iy) * w + ix] += 1.0;
    }
  }
  ObstacleField f;
  f.w = w;
  f.h = h;
  f.log_density.resize(counts.size());
  const double norm = static_cast<double>(pose_estimates.size()) * kNumBeams;
  for (size_t i = 0; i < counts.size(); ++i)
    f.log_density[i] = std::log(std::max(counts[i] / norm, kObstacleFloor));
  return f;
}

std::vector<std::vector<sim::Control>> generate_candidates(const ObstacleField& field,
                                                           const Pose& start, int n_candidates,
                                                           int horizon,
                                                           const CandidateConfig& cfg, Rng& rng) {
  require(horizon >= 1, ErrorCode::invalid_argument, "horizon must be >= 1");
  std::vector<std::vector<sim::Control>> out;
  out.reserve(n_candidates);

  std::vector<double> dtheta(horizon), grad(horizon);
  std::vector<double> ptheta(horizon);
  std::vector<double> lx(horizon), ly(horizon);

  for (int f = 0; f < n_candidates; ++f) {
    for (int t = 0; t < horizon; ++t) dtheta[t] = cfg.init_dtheta_std * rng.normal();
    nn::Adam adam(static_cast<size_t>(horizon), {cfg.lr, 0.9, 0.999, 1e-8});
    for (int it = 0; it < cfg.opt_steps; ++it) {
      // smooth rollout; headings unwrapped and measured from the start heading
      double x = start.x, y = start.y, rel = 0.0;
      for (int t = 0; t < horizon; ++t) {
        rel += dtheta[t];
        x += cfg.forward * std::cos(start.theta + rel);
        y += cfg.forward * std::sin(start.theta + rel);
        ptheta[t] = rel;
        field.value_grad(x, y, nullptr, &lx[t], &ly[t]);
      }
      // reverse sweep: ax/ay/at accumulate dLoss/d(pose_t)
      double ax = 0.0, ay = 0.0, at = 0.0;
      for (int t = horizon - 1; t >= 0; --t) {
        ax += lx[t];
        ay += ly[t];
        const double heading = start.theta + ptheta[t];
        at += 2.0 * cfg.angle_reg * ptheta[t] - cfg.forward * std::sin(heading) * ax +
              cfg.forward * std::cos(heading) * ay;
        grad[t] = at;
      }
      adam.step({std::span<double>(dtheta)}, {std::span<const double>(grad)});
    }
    std::vector<sim::Control> controls(horizon);
    for (int t = 0; t < horizon; ++t) controls[t] = {dtheta[t], cfg.forward};
    out.push_back(std::move(controls));
  }
  return out;
}

size_t select_best(std::span<const double> mi_scores) {
  require(!mi_scores.empty(), ErrorCode::invalid_argument, "no candidates to select from");
  size_t best = 0;
  for (size_t i = 1; i < mi_scores.size(); ++i)
    if (mi_scores[i] > mi_scores[best]) best = i;
  return best;
}

double infogain_metric(const slam::LatentMapPosterior& posterior) {
  return slam::map_kl(posterior);
}

double exploration_ratio(std::span<const Pose> poses, int tiles_per_side) {
  require(tiles_per_side >= 1, ErrorCode::invalid_argument, "tiles must be >= 1");
  std::vector<uint8_t> hit(static_cast<size_t>(tiles_per_side) * tiles_per_side, 0);
  for (const auto& p : poses) {
    const int ix = std::clamp(static_cast<int>(p.x * tiles_per_side), 0, tiles_per_side - 1);
    const int iy = std::clamp(static_cast<int>(p.y * tiles_per_side), 0, tiles_per_side - 1);
    hit[static_cast<size_t>(iy) * tiles_per_side + ix] = 1;
  }
  size_t count = 0;
  for (auto v : hit) count += v;
  return static_cast<double>(count) / (static_cast<double>(tiles_per_side) * tiles_per_side);
}

std::vector<ExploreCycleRecord> explore_loop(const sim::MazeSpec& maze, const Pose& start,
                                             slam::SlamEngine& engine, const ExploreConfig& cfg,
                                             int budget_steps, Rng& rng,
                                             std::vector<Pose>* true_poses_out) {
  std::vector<ExploreCycleRecord> trace;
  std::vector<Pose> true_poses{start};
  Pose true_pose = start;
  int executed = 0;
  int cycle = 0;

  while (executed + cfg.mi.horizon <= budget_steps) {
    const gm::MapRealization mean_map = engine.posterior().mean_map();
    const ObstacleField field = build_obstacle_field(engine.estimates(), engine.emission(),
                                                     mean_map, cfg.field_w, cfg.field_h);
    const Pose plan_start = engine.latest_estimate();
    Rng cand_rng = rng.split(0x100 + static_cast<uint64_t>(cycle));
    const auto candidates = generate_candidates(field, plan_start, cfg.mi.candidates,
                                                cfg.mi.horizon, cfg.candidates, cand_rng);

    std::vector<double> scores(candidates.size(), 0.0);
    const Rng mi_base = rng.split(0x200 + static_cast<uint64_t>(cycle));
    const int n_threads = std::max(1, cfg.threads);
    std::atomic<size_t> next{0};
    std::vector<std::future<void>> jobs;
    for (int w = 0; w < n_threads; ++w) {
      jobs.push_back(std::async(std::launch::async, [&]() {
        for (size_t f = next.fetch_add(1); f < candidates.size(); f = next.fetch_add(1)) {
          scores[f] = estimate_mi(engine.emission(), engine.transition(), engine.posterior(),
                                  plan_start, candidates[f], cfg.mi,
                                  mi_base.split(static_cast<uint64_t>(f)));
        }
      }));
    }
    for (auto& j : jobs) j.get();

    const size_t best = select_best(scores);
    for (const auto& u : candidates[best]) {
      true_pose = sim::step(maze, true_pose, u);
      true_poses.push_back(true_pose);
      engine.observe(u, sim::raycast(maze, true_pose));
      ++executed;
    }
    engine.train_minibatches(cfg.n_train);

    ExploreCycleRecord rec;
    rec.cycle = cycle;
    rec.steps_executed = executed;
    rec.infogain = engine.infogain();
    rec.exploration_ratio = exploration_ratio(true_poses, cfg.eval_tiles);
    rec.selected_mi = scores[best];
    rec.candidate_mis = scores;
    trace.push_back(std::move(rec));
    ++cycle;
  }
  if (true_poses_out) *true_poses_out = true_poses;
  return trace;
}

}  // namespace latmap::explore
