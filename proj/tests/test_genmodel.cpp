#include <doctest.h>

#include <cmath>

#include "latmap/error.hpp"
#include "latmap/genmodel.hpp"
#include "test_util.hpp"

using namespace latmap;
using namespace latmap::gm;
using latmap::nn::NetGrads;
using latmap::sim::kBeamStep;
using latmap::sim::kMaxRange;
using latmap::sim::kNumBeams;

namespace {

MapRealization random_map(int w, int h, int d, Rng& rng) {
  MapRealization m = MapRealization::zeros(w, h, d);
  for (auto& c : m.cells) c = rng.normal();
  return m;
}

EmissionModel small_emission(int d_m, Rng& rng) {
  return make_emission_model(d_m, {16, 16}, 0.1, rng);
}

// brute-force bilinear formula, written independently of the implementation
void oracle_bilinear(double x, double y, int w, int h, int* ix0, int* iy0, double out[4]) {
  double u = x * w - 0.5, v = y * h - 0.5;
  u = std::min(std::max(u, 0.0), static_cast<double>(w - 1));
  v = std::min(std::max(v, 0.0), static_cast<double>(h - 1));
  int i = static_cast<int>(std::floor(u));
  int j = static_cast<int>(std::floor(v));
  i = std::min(i, w - 2);
  j = std::min(j, h - 2);
  const double fu = u - i, fv = v - j;
  out[0] = (1 - fu) * (1 - fv);
  out[1] = fu * (1 - fv);
  out[2] = (1 - fu) * fv;
  out[3] = fu * fv;
  *ix0 = i;
  *iy0 = j;
}

}  // namespace

TEST_SUITE("genmodel") {

TEST_CASE("attention_weights: cell centre concentrates all weight") {
  const int w = 8, h = 8;
  const double cx = (3 + 0.5) / w, cy = (5 + 0.5) / h;
  const BilinearWeights bw = attention_weights(cx, cy, w, h);
  double sum = 0.0;
  for (double v : bw.w) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  int ones = 0;
  for (double v : bw.w)
    if (v > 1.0 - 1e-12) ++ones;
  CHECK(ones == 1);
}

TEST_CASE("attention_weights: midpoint of two horizontal centres splits evenly") {
  const int w = 8, h = 8;
  const double cx = (3 + 1.0) / w;  // halfway between centres of cells 3 and 4
  const double cy = (5 + 0.5) / h;
  const BilinearWeights bw = attention_weights(cx, cy, w, h);
  CHECK(bw.w[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(bw.w[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(bw.w[2] == doctest::Approx(0.0));
  CHECK(bw.w[3] == doctest::Approx(0.0));
}

TEST_CASE("attention_weights: matches the brute-force formula everywhere") {
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const double x = rng.uniform(), y = rng.uniform();
    const BilinearWeights bw = attention_weights(x, y, 8, 6);
    int ix0 = 0, iy0 = 0;
    double expect[4];
    oracle_bilinear(x, y, 8, 6, &ix0, &iy0, expect);
    CHECK(bw.ix0 == ix0);
    CHECK(bw.iy0 == iy0);
    for (int k = 0; k < 4; ++k) CHECK(bw.w[k] == doctest::Approx(expect[k]).epsilon(1e-12));
    double sum = 0.0;
    for (double v : bw.w) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("attention_weights: rejects out-of-bounds positions") {
  CHECK_THROWS_AS(attention_weights(1.2, 0.5, 8, 8), Error);
}

TEST_CASE("attend: constant map gives the constant everywhere") {
  MapRealization m = MapRealization::zeros(4, 4, 3);
  for (size_t i = 0; i < m.cells.size(); ++i) m.cells[i] = 2.5 - (i % 3);
  Rng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto chart = attend(m, Pose{rng.uniform(), rng.uniform(), rng.uniform(-kPi, kPi)});
    CHECK(chart[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(chart[1] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(chart[2] == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("attend: pose at a cell centre reads that cell") {
  Rng rng(23);
  MapRealization m = random_map(6, 6, 4, rng);
  const Pose p{(2 + 0.5) / 6.0, (4 + 0.5) / 6.0, 0.7};
  const auto chart = attend(m, p);
  const auto cell = m.cell(2, 4);
  for (int c = 0; c < 4; ++c) CHECK(chart[c] == doctest::Approx(cell[c]).epsilon(1e-12));
}

TEST_CASE("attend: exactly linear in the map") {
  Rng rng(24);
  const MapRealization m1 = random_map(5, 5, 3, rng);
  const MapRealization m2 = random_map(5, 5, 3, rng);
  MapRealization mix = MapRealization::zeros(5, 5, 3);
  const double a = 0.3, b = -1.7;
  for (size_t i = 0; i < mix.cells.size(); ++i) mix.cells[i] = a * m1.cells[i] + b * m2.cells[i];
  const Pose p{0.41, 0.83, 0.0};
  const auto c1 = attend(m1, p);
  const auto c2 = attend(m2, p);
  const auto cm = attend(mix, p);
  for (int c = 0; c < 3; ++c) CHECK(cm[c] == doctest::Approx(a * c1[c] + b * c2[c]).epsilon(1e-12));
}

TEST_CASE("attend: gradient w.r.t. the four active cells equals the weights") {
  Rng rng(25);
  MapRealization m = random_map(5, 5, 2, rng);
  const double x = 0.37, y = 0.61;
  BilinearWeights bw;
  std::vector<double> chart(2);
  attend_into(m, x, y, chart, &bw);
  // finite differences on each active cell, first chart dimension
  const int ix[4] = {bw.ix0, bw.ix0 + 1, bw.ix0, bw.ix0 + 1};
  const int iy[4] = {bw.iy0, bw.iy0, bw.iy0 + 1, bw.iy0 + 1};
  const double h = 1e-6;
  for (int k = 0; k < 4; ++k) {
    auto cell = m.cell(ix[k], iy[k]);
    const double keep = cell[0];
    cell[0] = keep + h;
    std::vector<double> up(2);
    attend_into(m, x, y, up);
    cell[0] = keep - h;
    std::vector<double> down(2);
    attend_into(m, x, y, down);
    cell[0] = keep;
    CHECK((up[0] - down[0]) / (2 * h) == doctest::Approx(bw.w[k]).epsilon(1e-6));
  }
}

TEST_CASE("emission_mean: zero heading is the raw head output") {
  Rng rng(26);
  const EmissionModel model = small_emission(4, rng);
  const std::vector<double> chart = test::random_vector(4, rng);
  EmissionEval eval;
  emission_forward(model, chart, 0.0, eval);
  for (int i = 0; i < kNumBeams; ++i) {
    CHECK(eval.mean[i] == doctest::Approx(eval.canonical[i]).epsilon(1e-12));
    CHECK(eval.mean[i] > 0.0);
    CHECK(eval.mean[i] < kMaxRange);
  }
}

TEST_CASE("emission_mean: one beam step shifts by exactly one index") {
  Rng rng(27);
  const EmissionModel model = small_emission(4, rng);
  const std::vector<double> chart = test::random_vector(4, rng);
  EmissionEval base, shifted;
  emission_forward(model, chart, 0.0, base);
  emission_forward(model, chart, kBeamStep, shifted);
  for (int i = 0; i < kNumBeams; ++i)
    CHECK(shifted.mean[i] == doctest::Approx(base.canonical[(i + 1) % kNumBeams]).epsilon(1e-12));
}

TEST_CASE("emission_mean: half-beam heading averages adjacent beams") {
  Rng rng(28);
  const EmissionModel model = small_emission(4, rng);
  const std::vector<double> chart = test::random_vector(4, rng);
  EmissionEval base, shifted;
  emission_forward(model, chart, 0.0, base);
  emission_forward(model, chart, kBeamStep / 2.0, shifted);
  for (int i = 0; i < kNumBeams; ++i) {
    const double expect = 0.5 * (base.canonical[i] + base.canonical[(i + 1) % kNumBeams]);
    CHECK(shifted.mean[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("circular_shift: composition of shifts") {
  Rng rng(29);
  std::array<double, kNumBeams> canon;
  for (auto& v : canon) v = rng.uniform();
  // integer-step composition: shift by 3 then 5 equals shift by 8
  const auto once = circular_shift(circular_shift(canon, 3.0), 5.0);
  const auto direct = circular_shift(canon, 8.0);
  for (int i = 0; i < kNumBeams; ++i) CHECK(once[i] == doctest::Approx(direct[i]).epsilon(1e-9));
  // fractional halves composing to an integer total
  const auto half = circular_shift(circular_shift(canon, 0.5), 0.5);
  const auto one = circular_shift(canon, 1.0);
  // piecewise-linear interpolation composes exactly only at integer totals of
  // integer parts; for 0.5+0.5 the smoothing differs, so only check bounds
  for (int i = 0; i < kNumBeams; ++i) {
    CHECK(half[i] <= 1.0);
    CHECK(one[i] <= 1.0);
  }
}

TEST_CASE("emission_logpdf: closed form at the mean") {
  Rng rng(30);
  const EmissionModel model = small_emission(4, rng);
  const std::vector<double> chart = test::random_vector(4, rng);
  EmissionEval eval;
  emission_forward(model, chart, 0.4, eval);
  sim::LidarScan obs;
  obs.readings = eval.mean;
  const double lp = emission_logpdf(model, eval, obs);
  const double expect = -0.5 * kNumBeams * std::log(2.0 * kPi) - kNumBeams * std::log(0.1);
  CHECK(lp == doctest::Approx(expect).epsilon(1e-9));
  CHECK(lp == doctest::Approx(27.6729).epsilon(1e-4));
}

TEST_CASE("emission_logpdf: one-sigma perturbation costs exactly half") {
  Rng rng(31);
  const EmissionModel model = small_emission(4, rng);
  const std::vector<double> chart = test::random_vector(4, rng);
  EmissionEval eval;
  emission_forward(model, chart, 0.0, eval);
  sim::LidarScan obs;
  obs.readings = eval.mean;
  const double at_mean = emission_logpdf(model, eval, obs);
  obs.readings[7] += model.sigma_e;
  CHECK(at_mean - emission_logpdf(model, eval, obs) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("emission_logpdf: gradient w.r.t. chart matches finite differences") {
  Rng rng(32);
  const EmissionModel model = small_emission(5, rng);
  std::vector<double> chart = test::random_vector(5, rng);
  sim::LidarScan obs;
  for (auto& r : obs.readings) r = rng.uniform(0.05, 0.5);
  const double heading = 0.9;

  EmissionEval eval;
  emission_forward(model, chart, heading, eval);
  std::vector<double> chart_grad(5, 0.0);
  NetGrads param_grads;
  param_grads.init_like(model.net);
  double heading_grad = 0.0;
  emission_logpdf_backward(model, eval, obs, 1.0, chart_grad, &param_grads, &heading_grad);

  auto eval_fn = [&] { return emission_logpdf(model, chart, heading, obs); };
  CHECK(test::max_fd_rel_error(chart, chart_grad, eval_fn) < 1e-4);

  // parameter gradients, spot-checking first and last layers
  EmissionModel m2 = model;
  auto eval_params = [&] { return emission_logpdf(m2, chart, heading, obs); };
  EmissionEval ev2;
  emission_forward(m2, chart, heading, ev2);
  NetGrads g2;
  g2.init_like(m2.net);
  std::vector<double> cg2(5, 0.0);
  emission_logpdf_backward(m2, ev2, obs, 1.0, cg2, &g2, nullptr);
  CHECK(test::max_fd_rel_error(m2.net.weights[0], g2.weights[0], eval_params) < 1e-3);
  const int last = m2.net.num_layers() - 1;
  CHECK(test::max_fd_rel_error(m2.net.biases[last], g2.biases[last], eval_params) < 1e-3);

  // heading gradient by central differences
  const double h = 1e-6;
  const double up = emission_logpdf(model, chart, heading + h, obs);
  const double down = emission_logpdf(model, chart, heading - h, obs);
  CHECK(heading_grad == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4));
}

TEST_CASE("transition_engineered: free motion, truncation and pure rotation") {
  sim::LidarScan predicted;
  predicted.readings.fill(kMaxRange);

  const Pose full = transition_engineered(Pose{0.5, 0.5, 0.0}, {0.0, 0.01}, predicted);
  CHECK(full.x == doctest::Approx(0.51).epsilon(1e-12));

  predicted.readings.fill(0.005);
  const Pose cut = transition_engineered(Pose{0.5, 0.5, 0.0}, {0.0, 0.01}, predicted, 1e-5);
  CHECK(cut.x == doctest::Approx(0.5 + 0.005 - 1e-5).epsilon(1e-9));

  const Pose rot = transition_engineered(Pose{0.5, 0.5, 0.0}, {0.7, 0.0}, predicted);
  CHECK(rot.x == 0.5);
  CHECK(rot.y == 0.5);
  CHECK(rot.theta == doctest::Approx(0.7));
}

TEST_CASE("transition_learned: zero net leaves the pose unchanged") {
  Rng rng(33);
  TransitionModel model = make_learned_transition({8, 8}, 0.0, rng);
  for (auto& w : model.net.weights)
    std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : model.net.biases)
    std::fill(b.begin(), b.end(), 0.0);
  std::vector<double> scan(kNumBeams, 0.3);
  const Pose p = transition_learned_mean(model, Pose{0.4, 0.6, 1.0}, {0.2, 0.01}, scan);
  CHECK(p.x == 0.4);
  CHECK(p.y == 0.6);
  CHECK(p.theta == doctest::Approx(1.0));
}

TEST_CASE("transition_learned: engineered variant rejects learned calls") {
  TransitionModel model;  // engineered by default
  std::vector<double> scan(kNumBeams, 0.3);
  CHECK_THROWS_AS(transition_learned_mean(model, Pose{}, {0, 0}, scan), Error);
}

TEST_CASE("train_transition: constant targets are learned to high precision") {
  Rng rng(34);
  TransitionModel model = make_learned_transition({16, 16}, 0.0, rng);
  std::vector<TransitionSample> data;
  sim::LidarScan scan;
  scan.readings.fill(0.4);
  for (int i = 0; i < 256; ++i) {
    TransitionSample s;
    s.pose = Pose{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(-kPi, kPi)};
    s.u = {0.0, 0.0};
    s.scan = scan;
    s.next = s.pose;  // identity transition
    data.push_back(s);
  }
  TransitionTrainConfig cfg;
  cfg.epochs = 600;
  cfg.lr = 1e-2;
  cfg.seed = 1;
  const TransitionTrainReport report = train_transition(model, data, cfg);
  CHECK(report.final_holdout_rmse < 1e-3);
}

TEST_CASE("train_transition: loss trend is non-increasing") {
  Rng rng(35);
  TransitionModel model = make_learned_transition({24, 24}, 0.0, rng);
  const sim::MazeSpec maze = sim::generate_maze(2, sim::Complexity::simple, 4);
  std::vector<TransitionSample> data;
  sim::RandomWalkPolicy policy;
  Rng walk_rng(3);
  Pose pose{0.12, 0.12, 0.0};
  for (int t = 0; t < 1500; ++t) {
    const sim::LidarScan scan = sim::raycast(maze, pose);
    const sim::Control u = policy.next(walk_rng, scan);
    const Pose next = sim::step(maze, pose, u);
    data.push_back({pose, u, scan, next});
    pose = next;
  }
  TransitionTrainConfig cfg;
  cfg.epochs = 40;
  cfg.lr = 2e-3;
  cfg.seed = 2;
  const TransitionTrainReport report = train_transition(model, data, cfg);
  // least-squares slope of the epoch losses
  const auto& y = report.epoch_train_loss;
  double sx = 0, sy = 0, sxy = 0, sxx = 0;
  for (size_t i = 0; i < y.size(); ++i) {
    sx += i;
    sy += y[i];
    sxy += i * y[i];
    sxx += static_cast<double>(i) * i;
  }
  const double n = static_cast<double>(y.size());
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope <= 1e-9);
}

TEST_CASE("train_transition: one-step generalisation on held-out steps") {
  Rng rng(36);
  TransitionModel model = make_learned_transition({32, 32, 32}, 0.0, rng);
  const sim::MazeSpec maze = sim::generate_maze(6, sim::Complexity::simple, 4);
  std::vector<TransitionSample> data;
  sim::RandomWalkPolicy policy;
  Rng walk_rng(4);
  Pose pose{0.12, 0.12, 0.0};
  for (int t = 0; t < 6000; ++t) {
    const sim::LidarScan scan = sim::raycast(maze, pose);
    const sim::Control u = policy.next(walk_rng, scan);
    const Pose next = sim::step(maze, pose, u);
    data.push_back({pose, u, scan, next});
    pose = next;
  }
  TransitionTrainConfig cfg;
  cfg.epochs = 60;
  cfg.lr = 2e-3;
  cfg.seed = 3;
  const TransitionTrainReport report = train_transition(model, data, cfg);
  CHECK(report.final_holdout_rmse < 0.005);
}

TEST_CASE("train_transition: empty dataset rejected") {
  Rng rng(37);
  TransitionModel model = make_learned_transition({8}, 0.0, rng);
  CHECK_THROWS_AS(train_transition(model, {}, {}), Error);
}

TEST_CASE("ancestral_sample: deterministic when all noise is off") {
  Rng rng(38);
  const MapRealization map = random_map(6, 6, 4, rng);
  EmissionModel emission = small_emission(4, rng);
  emission.sigma_e = 0.0;
  TransitionModel transition;  // engineered, sigma_t 0
  std::vector<sim::Control> controls(10, {0.1, 0.01});
  Rng s1(5), s2(6);
  const AncestralResult a = ancestral_sample(map, Pose{0.5, 0.5, 0.0}, controls, transition,
                                             emission, s1);
  const AncestralResult b = ancestral_sample(map, Pose{0.5, 0.5, 0.0}, controls, transition,
                                             emission, s2);
  CHECK(a.obs_concat == b.obs_concat);
  REQUIRE(a.obs_concat.size() == 10 * static_cast<size_t>(kNumBeams));
  // equals the mean rollout
  Pose pose{0.5, 0.5, 0.0};
  size_t idx = 0;
  for (const auto& u : controls) {
    pose = transition_mean_in_model(transition, emission, map, pose, u);
    pose.x = std::clamp(pose.x, 0.0, 1.0);
    pose.y = std::clamp(pose.y, 0.0, 1.0);
    const auto chart = attend(map, pose);
    const sim::LidarScan mean = emission_mean(emission, chart, pose.theta);
    for (int k = 0; k < kNumBeams; ++k) CHECK(a.obs_concat[idx++] == mean.readings[k]);
  }
}

TEST_CASE("ancestral_sample: same seed, same samples") {
  Rng rng(39);
  const MapRealization map = random_map(6, 6, 4, rng);
  const EmissionModel emission = small_emission(4, rng);
  TransitionModel transition;
  transition.sigma_t = 4e-4;
  std::vector<sim::Control> controls(8, {0.05, 0.01});
  Rng s1(77), s2(77);
  const auto a = ancestral_sample(map, Pose{0.4, 0.4, 0.2}, controls, transition, emission, s1);
  const auto b = ancestral_sample(map, Pose{0.4, 0.4, 0.2}, controls, transition, emission, s2);
  CHECK(a.obs_concat == b.obs_concat);
}

TEST_CASE("ancestral_sample: sample mean approaches the emission mean") {
  Rng rng(40);
  const MapRealization map = random_map(4, 4, 3, rng);
  const EmissionModel emission = make_emission_model(3, {8}, 0.1, rng);
  TransitionModel transition;  // deterministic pose path
  std::vector<sim::Control> controls(1, {0.0, 0.0});
  const Pose start{0.5, 0.5, 0.0};

  const int n = 10000;
  std::vector<double> mean(kNumBeams, 0.0);
  Rng sample_rng(123);
  for (int i = 0; i < n; ++i) {
    const auto r = ancestral_sample(map, start, controls, transition, emission, sample_rng);
    for (int k = 0; k < kNumBeams; ++k) mean[k] += r.obs_concat[k];
  }
  const auto chart = attend(map, start);
  const sim::LidarScan expect = emission_mean(emission, chart, start.theta);
  const double tol = 3.0 * emission.sigma_e / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < kNumBeams; ++k)
    CHECK(std::fabs(mean[k] / n - expect.readings[k]) < tol * 1.5);
}

}  // TEST_SUITE
