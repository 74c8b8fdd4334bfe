#include <doctest.h>

#include <cmath>

#include "latmap/error.hpp"
#include "latmap/explore.hpp"
#include "test_util.hpp"

using namespace latmap;
using namespace latmap::explore;
using latmap::sim::kNumBeams;

namespace {

std::vector<std::vector<double>> gaussian_cloud(int n, int d, Rng& rng, double sigma = 1.0) {
  std::vector<std::vector<double>> out(n);
  for (auto& p : out) {
    p.resize(d);
    for (auto& v : p) v = sigma * rng.normal();
  }
  return out;
}

// emission whose raw outputs are the biases only (zero weights), so predicted
// readings are directly controllable per beam
gm::EmissionModel bias_only_emission(const std::array<double, kNumBeams>& readings, int d_m) {
  Rng rng(1);
  gm::EmissionModel model = gm::make_emission_model(d_m, {4}, 0.1, rng);
  for (auto& w : model.net.weights)
    std::fill(w.begin(), w.end(), 0.0);
  std::fill(model.net.biases[0].begin(), model.net.biases[0].end(), 0.0);
  for (int k = 0; k < kNumBeams; ++k) {
    const double p = std::clamp(readings[k] / sim::kMaxRange, 1e-9, 1.0 - 1e-9);
    model.net.biases[1][k] = std::log(p / (1.0 - p));  // logit so head(b) = readings[k]
  }
  return model;
}

}  // namespace

TEST_SUITE("explore") {

TEST_CASE("knn_entropy: calibrated on a 2D standard normal") {
  Rng rng(11);
  const auto cloud = gaussian_cloud(5000, 2, rng);
  EntropyConfig cfg;
  cfg.k = 5;
  const double h = knn_entropy(cloud, cfg);
  const double truth = std::log(2.0 * kPi * std::exp(1.0));  // 2.8379
  CHECK(std::fabs(h - truth) < 0.1);
}

TEST_CASE("knn_entropy: calibrated on the uniform square") {
  Rng rng(12);
  std::vector<std::vector<double>> cloud(5000);
  for (auto& p : cloud) p = {rng.uniform(), rng.uniform()};
  EntropyConfig cfg;
  cfg.k = 5;
  CHECK(std::fabs(knn_entropy(cloud, cfg)) < 0.1);
}

TEST_CASE("knn_entropy: exact scale law") {
  Rng rng(13);
  const auto cloud = gaussian_cloud(400, 3, rng);
  auto scaled = cloud;
  for (auto& p : scaled)
    for (auto& v : p) v *= 2.0;  // power of two keeps scaling exact
  EntropyConfig cfg;
  const double h0 = knn_entropy(cloud, cfg);
  const double h1 = knn_entropy(scaled, cfg);
  CHECK(h1 - h0 == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("knn_entropy: translation invariance") {
  Rng rng(14);
  const auto cloud = gaussian_cloud(400, 2, rng);
  auto moved = cloud;
  for (auto& p : moved) {
    p[0] += 1.5;
    p[1] -= 2.25;
  }
  EntropyConfig cfg;
  CHECK(knn_entropy(moved, cfg) == doctest::Approx(knn_entropy(cloud, cfg)).epsilon(1e-9));
}

TEST_CASE("knn_entropy: duplicates are floored, not fatal") {
  std::vector<std::vector<double>> cloud(10, std::vector<double>{0.5, 0.5});
  cloud.back() = {0.6, 0.5};
  EntropyConfig cfg;
  CHECK(std::isfinite(knn_entropy(cloud, cfg)));
}

TEST_CASE("knn_entropy: needs more samples than k") {
  std::vector<std::vector<double>> cloud(3, std::vector<double>{0.0});
  EntropyConfig cfg;
  cfg.k = 3;
  CHECK_THROWS_AS(knn_entropy(cloud, cfg), Error);
}

TEST_CASE("estimate_mi: collapsed posterior scores zero") {
  Rng rng(15);
  slam::LatentMapPosterior post = slam::LatentMapPosterior::standard_normal(6, 6, 3);
  for (auto& m : post.mu) m = 0.5 * rng.normal();
  for (auto& l : post.log_sigma2) l = std::log(1e-12);
  const gm::EmissionModel emission = gm::make_emission_model(3, {12}, 0.1, rng);
  gm::TransitionModel transition;
  MiConfig cfg;
  cfg.horizon = 25;
  std::vector<sim::Control> controls(cfg.horizon, {0.05, 0.01});
  const double mi = estimate_mi(emission, transition, post, Pose{0.5, 0.5, 0.0}, controls, cfg,
                                Rng(99));
  CHECK(std::fabs(mi) < 0.3);
}

TEST_CASE("estimate_mi: map-independent observations score exactly zero") {
  Rng rng(16);
  slam::LatentMapPosterior post = slam::LatentMapPosterior::standard_normal(6, 6, 3);
  // emission ignores the chart entirely (zero weights): obs depend only on
  // the CRN noise, so every sample set is identical
  std::array<double, kNumBeams> fixed;
  fixed.fill(0.3);
  const gm::EmissionModel emission = bias_only_emission(fixed, 3);
  gm::TransitionModel transition;
  MiConfig cfg;
  cfg.horizon = 10;
  std::vector<sim::Control> controls(cfg.horizon, {0.1, 0.01});
  const double mi = estimate_mi(emission, transition, post, Pose{0.5, 0.5, 0.0}, controls, cfg,
                                Rng(100));
  CHECK(mi == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("estimate_mi: uncertain region beats collapsed region") {
  // left half of the map collapsed, right half at the prior; candidates
  // heading right should carry more information
  Rng rng(17);
  const gm::EmissionModel emission = gm::make_emission_model(4, {16}, 0.1, rng);
  gm::TransitionModel transition;
  int wins = 0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    slam::LatentMapPosterior post = slam::LatentMapPosterior::standard_normal(8, 8, 4);
    for (int iy = 0; iy < 8; ++iy)
      for (int ix = 0; ix < 8; ++ix)
        for (int c = 0; c < 4; ++c) {
          const size_t i = (static_cast<size_t>(iy) * 8 + ix) * 4 + c;
          if (ix < 4) post.log_sigma2[i] = std::log(1e-12);  // collapsed half
        }
    MiConfig cfg;
    cfg.horizon = 20;
    std::vector<sim::Control> to_uncertain(cfg.horizon, {0.0, 0.01});   // heading 0: +x
    std::vector<sim::Control> to_collapsed(cfg.horizon, {0.0, 0.01});
    const Pose start_right{0.5, 0.5, 0.0};
    const Pose start_left{0.5, 0.5, kPi};
    const double mi_unc = estimate_mi(emission, transition, post, start_right, to_uncertain, cfg,
                                      Rng(200 + s));
    const double mi_col = estimate_mi(emission, transition, post, start_left, to_collapsed, cfg,
                                      Rng(300 + s));
    if (mi_unc > mi_col) ++wins;
  }
  CHECK(wins >= 8);
}

TEST_CASE("estimate_mi: deterministic under a fixed rng") {
  Rng rng(18);
  slam::LatentMapPosterior post = slam::LatentMapPosterior::standard_normal(4, 4, 2);
  const gm::EmissionModel emission = gm::make_emission_model(2, {8}, 0.1, rng);
  gm::TransitionModel transition;
  MiConfig cfg;
  cfg.horizon = 5;
  cfg.marginal_samples = 8;
  cfg.map_samples = 4;
  cfg.conditional_samples = 8;
  std::vector<sim::Control> controls(cfg.horizon, {0.2, 0.01});
  const double a = estimate_mi(emission, transition, post, Pose{0.5, 0.5, 0}, controls, cfg,
                               Rng(7));
  const double b = estimate_mi(emission, transition, post, Pose{0.5, 0.5, 0}, controls, cfg,
                               Rng(7));
  CHECK(a == b);
}

TEST_CASE("build_obstacle_field: saturated predictions leave the field at the floor") {
  std::array<double, kNumBeams> sat;
  sat.fill(sim::kMaxRange);
  const gm::EmissionModel emission = bias_only_emission(sat, 2);
  const gm::MapRealization map = gm::MapRealization::zeros(4, 4, 2);
  std::vector<Pose> poses{{0.5, 0.5, 0.0}, {0.3, 0.7, 1.0}};
  const ObstacleField field = build_obstacle_field(poses, emission, map, 16, 16);
  for (double v : field.log_density) CHECK(v == doctest::Approx(std::log(kObstacleFloor)));
}

TEST_CASE("build_obstacle_field: single short beam concentrates mass at its endpoint") {
  std::array<double, kNumBeams> readings;
  readings.fill(sim::kMaxRange);  // saturated -> excluded
  readings[0] = 0.2;
  const gm::EmissionModel emission = bias_only_emission(readings, 2);
  const gm::MapRealization map = gm::MapRealization::zeros(4, 4, 2);
  std::vector<Pose> poses{{0.5, 0.5, 0.0}};
  const int W = 32;
  const ObstacleField field = build_obstacle_field(poses, emission, map, W, W);

  // expected endpoint (0.7, 0.5); bin (22, 16): log(1 / (1*20))
  size_t hot = 0;
  double best = -1e9;
  for (size_t i = 0; i < field.log_density.size(); ++i)
    if (field.log_density[i] > best) {
      best = field.log_density[i];
      hot = i;
    }
  const int ix = static_cast<int>(hot % W), iy = static_cast<int>(hot / W);
  CHECK(ix == static_cast<int>(0.7 * W));
  CHECK(iy == static_cast<int>(0.5 * W));
  CHECK(best == doctest::Approx(std::log(1.0 / kNumBeams)).epsilon(1e-12));
}

TEST_CASE("build_obstacle_field: node value is the exact log count") {
  std::array<double, kNumBeams> readings;
  readings.fill(0.25);
  const gm::EmissionModel emission = bias_only_emission(readings, 2);
  const gm::MapRealization map = gm::MapRealization::zeros(4, 4, 2);
  std::vector<Pose> poses{{0.5, 0.5, 0.3}};
  const int W = 16;
  const ObstacleField field = build_obstacle_field(poses, emission, map, W, W);
  for (int iy = 0; iy < W; ++iy)
    for (int ix = 0; ix < W; ++ix) {
      const double cx = (ix + 0.5) / W, cy = (iy + 0.5) / W;
      CHECK(field.value(cx, cy) ==
            doctest::Approx(field.log_density[static_cast<size_t>(iy) * W + ix]).epsilon(1e-12));
    }
}

TEST_CASE("build_obstacle_field: mass normalisation") {
  std::array<double, kNumBeams> readings;
  readings.fill(0.25);
  const gm::EmissionModel emission = bias_only_emission(readings, 2);
  const gm::MapRealization map = gm::MapRealization::zeros(4, 4, 2);
  std::vector<Pose> poses{{0.5, 0.5, 0.3}, {0.4, 0.6, -1.2}, {0.52, 0.48, 2.0}};
  const ObstacleField field = build_obstacle_field(poses, emission, map, 24, 24);
  double mass = 0.0;
  int binned = 0;
  for (double v : field.log_density) {
    const double d = std::exp(v);
    if (d > kObstacleFloor * 1.0001) {
      mass += d;
      binned = 1;
    }
  }
  CHECK(binned == 1);
  CHECK(mass <= 1.0 + 1e-12);
  // all beams are unsaturated and land inside: mass = (3*20)/(3*20) = 1
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("build_obstacle_field: empty dataset rejected") {
  const gm::MapRealization map = gm::MapRealization::zeros(4, 4, 2);
  Rng rng(19);
  const gm::EmissionModel emission = gm::make_emission_model(2, {4}, 0.1, rng);
  CHECK_THROWS_AS(build_obstacle_field({}, emission, map, 8, 8), Error);
}

TEST_CASE("obstacle field value/gradient: uniform field has zero gradient") {
  const ObstacleField field = uniform_field(16, 16);
  Rng rng(20);
  for (int i = 0; i < 50; ++i) {
    double v, gx, gy;
    field.value_grad(rng.uniform(), rng.uniform(), &v, &gx, &gy);
    CHECK(v == doctest::Approx(std::log(kObstacleFloor)));
    CHECK(gx == 0.0);
    CHECK(gy == 0.0);
  }
}

TEST_CASE("obstacle field gradient matches finite differences away from edges") {
  ObstacleField field = uniform_field(16, 16);
  Rng rng(21);
  for (auto& v : field.log_density) v = rng.normal();
  for (int trial = 0; trial < 200; ++trial) {
    const double x = rng.uniform(0.05, 0.95), y = rng.uniform(0.05, 0.95);
    // skip points near interpolation-cell edges where the surface kinks
    const double ux = x * 16 - 0.5, uy = y * 16 - 0.5;
    if (std::fabs(ux - std::round(ux)) < 0.02 || std::fabs(uy - std::round(uy)) < 0.02) continue;
    double v, gx, gy;
    field.value_grad(x, y, &v, &gx, &gy);
    const double h = 1e-7;
    const double fx = (field.value(x + h, y) - field.value(x - h, y)) / (2 * h);
    const double fy = (field.value(x, y + h) - field.value(x, y - h)) / (2 * h);
    CHECK(gx == doctest::Approx(fx).epsilon(1e-6));
    CHECK(gy == doctest::Approx(fy).epsilon(1e-6));
  }
}

TEST_CASE("generate_candidates: regulariser shrinks turning on a uniform field") {
  const ObstacleField field = uniform_field(16, 16);
  CandidateConfig cfg;
  cfg.opt_steps = 500;
  Rng rng(22);
  // measure init vs optimised |dtheta| on the same seeds
  Rng init_rng = rng;
  double init_abs = 0.0, opt_abs = 0.0;
  int count = 0;
  const auto cands = generate_candidates(field, Pose{0.5, 0.5, 0.0}, 6, 20, cfg, rng);
  for (const auto& cand : cands) {
    for (const auto& u : cand) {
      opt_abs += std::fabs(u.dtheta);
      init_abs += std::fabs(cfg.init_dtheta_std * init_rng.normal());
      ++count;
    }
  }
  CHECK(opt_abs / count < 0.5 * (init_abs / count));
}

TEST_CASE("generate_candidates: descends away from a density ridge") {
  // vertical high-density ridge at x ~ 0.6
  ObstacleField field = uniform_field(32, 32);
  for (int iy = 0; iy < 32; ++iy)
    for (int ix = 18; ix < 21; ++ix)
      field.log_density[static_cast<size_t>(iy) * 32 + ix] = std::log(0.5);
  CandidateConfig cfg;
  Rng rng(23);
  const Pose start{0.55, 0.5, 0.0};  // facing the ridge
  const auto cands = generate_candidates(field, start, 20, 15, cfg, rng);
  Rng init_rng(23);
  int improved = 0;
  for (const auto& cand : cands) {
    // endpoint under the optimised controls
    Pose p = start;
    for (const auto& u : cand) p = gm::transition_smooth(p, u);
    const double opt_density = field.value(std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0));
    // straight-ahead endpoint would sit on the ridge
    Pose q = start;
    for (int t = 0; t < 15; ++t) q = gm::transition_smooth(q, {0.0, cfg.forward});
    const double straight_density =
        field.value(std::clamp(q.x, 0.0, 1.0), std::clamp(q.y, 0.0, 1.0));
    if (opt_density < straight_density) ++improved;
  }
  CHECK(improved >= 18);  // >= 90%
}

TEST_CASE("generate_candidates: deterministic for a fixed seed") {
  const ObstacleField field = uniform_field(8, 8);
  CandidateConfig cfg;
  cfg.opt_steps = 50;
  Rng a(9), b(9);
  const auto ca = generate_candidates(field, Pose{0.5, 0.5, 0.2}, 1, 10, cfg, a);
  const auto cb = generate_candidates(field, Pose{0.5, 0.5, 0.2}, 1, 10, cfg, b);
  REQUIRE(ca.size() == 1);
  for (size_t t = 0; t < ca[0].size(); ++t) CHECK(ca[0][t].dtheta == cb[0][t].dtheta);
}

TEST_CASE("generate_candidates: control gradient matches finite differences") {
  // the BPTT path through the smooth rollout, checked against FD on the
  // candidate objective
  ObstacleField field = uniform_field(16, 16);
  Rng rng(24);
  for (auto& v : field.log_density) v = 0.5 * rng.normal();
  const Pose start{0.45, 0.55, 0.3};
  const int T = 8;
  const double reg = 2.0, fwd = 0.01;
  std::vector<double> dtheta(T);
  for (auto& d : dtheta) d = 0.2 * rng.normal();

  auto objective = [&] {
    double loss = 0.0;
    double x = start.x, y = start.y, rel = 0.0;
    for (int t = 0; t < T; ++t) {
      rel += dtheta[t];
      x += fwd * std::cos(start.theta + rel);
      y += fwd * std::sin(start.theta + rel);
      loss += field.value(x, y) + reg * rel * rel;
    }
    return loss;
  };

  // analytic gradient replicated from the optimiser's reverse sweep
  std::vector<double> grad(T, 0.0);
  {
    std::vector<double> ptheta(T), lx(T), ly(T);
    double x = start.x, y = start.y, rel = 0.0;
    for (int t = 0; t < T; ++t) {
      rel += dtheta[t];
      x += fwd * std::cos(start.theta + rel);
      y += fwd * std::sin(start.theta + rel);
      ptheta[t] = rel;
      double v;
      field.value_grad(x, y, &v, &lx[t], &ly[t]);
    }
    double ax = 0, ay = 0, at = 0;
    for (int t = T - 1; t >= 0; --t) {
      ax += lx[t];
      ay += ly[t];
      const double heading = start.theta + ptheta[t];
      at += 2.0 * reg * ptheta[t] - fwd * std::sin(heading) * ax + fwd * std::cos(heading) * ay;
      grad[t] = at;
    }
  }
  CHECK(test::max_fd_rel_error(dtheta, grad, objective, 1e-6) < 1e-3);
}

TEST_CASE("select_best: argmax with lowest-index ties") {
  const std::vector<double> a{1.0, 3.0, 2.0};
  CHECK(select_best(a) == 1);
  const std::vector<double> ties{2.0, 2.0, 2.0};
  CHECK(select_best(ties) == 0);
  std::vector<double> scaled{1.0, 3.0, 2.0};
  for (auto& v : scaled) v *= 17.5;
  CHECK(select_best(scaled) == select_best(a));
  CHECK_THROWS_AS(select_best(std::vector<double>{}), Error);
}

TEST_CASE("infogain_metric: prior scores zero, one cell scores a half") {
  slam::LatentMapPosterior post = slam::LatentMapPosterior::standard_normal(4, 4, 2);
  CHECK(infogain_metric(post) == 0.0);
  post.mu[5] = 1.0;
  CHECK(infogain_metric(post) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("exploration_ratio: counting and binning conventions") {
  CHECK(exploration_ratio({}, 6) == 0.0);

  // 9 distinct tiles of a 6x6 grid
  std::vector<Pose> poses;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) poses.push_back({(i + 0.5) / 6.0, (j + 0.5) / 6.0, 0.0});
  CHECK(exploration_ratio(poses, 6) == doctest::Approx(0.25));

  // a pose exactly on a tile boundary lands in exactly one tile
  std::vector<Pose> edge{{1.0 / 6.0, 0.5, 0.0}};
  CHECK(exploration_ratio(edge, 6) == doctest::Approx(1.0 / 36.0));
}

}  // TEST_SUITE
