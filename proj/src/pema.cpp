#include "latmap/pema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "latmap/checkpoint.hpp"
#include "latmap/error.hpp"

namespace latmap::pema {

using nlohmann::json;
using sim::kNumBeams;

PemaPolicy make_policy(int hidden, Rng& rng) {
  PemaPolicy p;
  p.lstm = nn::make_lstm_cell(kNumBeams, hidden, rng);
  p.head_w.resize(hidden);
  const double s = std::sqrt(1.0 / hidden);
  for (auto& v : p.head_w) v = s * rng.normal();
  p.head_b = 0.0;
  return p;
}

PolicyRunner::PolicyRunner(const PemaPolicy& policy)
    : policy_(policy), state_(nn::lstm_zero_state(policy.lstm.hidden_size)) {}

sim::Control PolicyRunner::next(const sim::LidarScan& scan) {
  state_ = nn::lstm_step(policy_.lstm, std::span<const double>(scan.readings.data(), kNumBeams),
                         state_);
  double dtheta = policy_.head_b;
  for (int j = 0; j < policy_.lstm.hidden_size; ++j)
    dtheta += policy_.head_w[j] * nn::apply_activation(nn::Activation::softsign, state_.h[j]);
  return sim::Control{dtheta, policy_.forward_offset};
}

std::vector<Pose> pema_rollout(const PemaPolicy& policy, const sim::MazeSpec& maze,
                               const Pose& start, int steps) {
  require(steps >= 1, ErrorCode::invalid_argument, "steps must be >= 1");
  PolicyRunner runner(policy);
  std::vector<Pose> poses;
  poses.reserve(steps);
  Pose pose = start;
  sim::Control u{0.0, 0.0};  // the first environment step uses a zero control
  for (int t = 0; t < steps; ++t) {
    pose = sim::step(maze, pose, u);
    poses.push_back(pose);
    u = runner.next(sim::raycast(maze, pose));
  }
  return poses;
}

double pema_loss(std::span<const Pose> poses, int tiles_per_side) {
  require(tiles_per_side >= 1, ErrorCode::invalid_argument, "tiles must be >= 1");
  std::vector<uint8_t> hit(static_cast<size_t>(tiles_per_side) * tiles_per_side, 0);
  for (const auto& p : poses) {
    const int ix = std::clamp(static_cast<int>(p.x * tiles_per_side), 0, tiles_per_side - 1);
    const int iy = std::clamp(static_cast<int>(p.y * tiles_per_side), 0, tiles_per_side - 1);
    hit[static_cast<size_t>(iy) * tiles_per_side + ix] = 1;
  }
  double count = 0.0;
  for (auto v : hit) count += v;
  return -count;
}

Pose random_free_pose(const sim::MazeSpec& maze, double clearance, Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Pose p;
    p.x = rng.uniform(clearance, 1.0 - clearance);
    p.y = rng.uniform(clearance, 1.0 - clearance);
    p.theta = rng.uniform(-kPi, kPi);
    double min_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 8; ++k)
      min_d = std::min(min_d, sim::ray_distance(maze, p.x, p.y, k * kPi / 4.0));
    if (min_d > clearance) return p;
  }
  fail(ErrorCode::invalid_state, "could not sample a free pose");
}

namespace {

std::vector<std::span<double>> policy_views(PemaPolicy& p) {
  auto views = p.lstm.param_views();
  views.emplace_back(p.head_w);
  views.emplace_back(&p.head_b, 1);
  return views;
}

void add_scaled(PemaPolicy& p, const std::vector<double>& eps, double scale) {
  size_t off = 0;
  for (auto v : policy_views(p))
    for (auto& x : v) x += scale * eps[off++];
}

}  // namespace

ArsReport ars_train(PemaPolicy& policy, const std::vector<sim::MazeSpec>& worlds,
                    const ArsConfig& cfg, Rng& rng) {
  require(!worlds.empty(), ErrorCode::invalid_argument, "need at least one training world");
  ArsReport report;
  size_t n_params = 0;
  for (auto v : policy_views(policy)) n_params += v.size();
  std::vector<double> eps(n_params);

  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<std::vector<double>> perts;
    std::vector<double> r_back, r_forth;
    for (int k = 0; k < cfg.k_pert; ++k) {
      for (auto& e : eps) e = cfg.sigma_pert * rng.normal();

      double s_back = 0.0, s_forth = 0.0;
      for (size_t m = 0; m < worlds.size(); ++m) {
        // common start per +/- pair per world
        const Pose start = random_free_pose(worlds[m], 0.02, rng);
        PemaPolicy back = policy;
        add_scaled(back, eps, -1.0);
        PemaPolicy forth = policy;
        add_scaled(forth, eps, +1.0);
        s_back -= pema_loss(pema_rollout(back, worlds[m], start, cfg.rollout_steps),
                            cfg.reward_tiles);
        s_forth -= pema_loss(pema_rollout(forth, worlds[m], start, cfg.rollout_steps),
                             cfg.reward_tiles);
      }
      perts.push_back(eps);
      r_back.push_back(s_back);
      r_forth.push_back(s_forth);
    }

    // reward std over all collected rollout scores, floored
    double mean = 0.0;
    for (int k = 0; k < cfg.k_pert; ++k) mean += r_back[k] + r_forth[k];
    mean /= 2.0 * cfg.k_pert;
    double var = 0.0;
    for (int k = 0; k < cfg.k_pert; ++k)
      var += (r_back[k] - mean) * (r_back[k] - mean) + (r_forth[k] - mean) * (r_forth[k] - mean);
    var /= 2.0 * cfg.k_pert;
    const double sigma_r = std::max(std::sqrt(var), 1e-8);

    std::vector<double> update(n_params, 0.0);
    for (int k = 0; k < cfg.k_pert; ++k) {
      const double w = (r_forth[k] - r_back[k]) * cfg.eta / (cfg.k_pert * sigma_r);
      for (size_t i = 0; i < n_params; ++i) update[i] += w * perts[k][i];
    }
    size_t off = 0;
    for (auto v : policy_views(policy))
      for (auto& x : v) x += update[off++];
    report.mean_reward.push_back(mean);
  }
  return report;
}

void save_policy(const PemaPolicy& policy, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["lstm"] = nn::lstm_to_json(policy.lstm);
  j["head_w"] = policy.head_w;
  j["head_b"] = policy.head_b;
  j["forward_offset"] = policy.forward_offset;
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

PemaPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open policy file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::io, "bad policy file " + path + ": " + e.what());
  }
  PemaPolicy p;
  p.lstm = nn::lstm_from_json(j.at("lstm"));
  p.head_w = j.at("head_w").get<std::vector<double>>();
  p.head_b = j.at("head_b").get<double>();
  p.forward_offset = j.at("forward_offset").get<double>();
  return p;
}

}  // namespace latmap::pema
