#include "latmap/navigate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

#include "latmap/error.hpp"

namespace latmap::nav {

using sim::kNumBeams;

double safety_penalty(const sim::LidarScan& predicted, const SafetyParams& params) {
  double total = 0.0;
  for (int i = 0; i < kNumBeams; ++i)
    total += params.mu / (1.0 + std::exp((predicted.readings[i] - params.delta) * params.sigma));
  return total;
}

namespace {

struct Node {
  Pose state;
  double g = 0.0;
  double f = 0.0;
  int64_t cell = 0;
  int parent = -1;  // index into the node arena
  int via = -1;     // successor record used to reach this node
};

struct HeapEntry {
  double f;
  int node;
  bool operator>(const HeapEntry& o) const { return f > o.f; }
};

int64_t cell_key(const Pose& p, double cell_size) {
  const int64_t ix = static_cast<int64_t>(std::floor(p.x / cell_size));
  const int64_t iy = static_cast<int64_t>(std::floor(p.y / cell_size));
  return ix * 100000 + iy;
}

}  // namespace

Plan hybrid_astar_generic(const Pose& start, const Vec2& goal, double goal_tolerance,
                          double cell_size, int max_expansions, const ExpandFn& expand,
                          uint64_t seed) {
  Rng rng(seed ^ 0x61737461ULL);
  Plan plan;

  std::vector<Node> arena;
  std::vector<std::vector<sim::Control>> edge_controls;
  std::unordered_map<int64_t, double> best_g;

  auto heuristic = [&](const Pose& p) { return std::hypot(p.x - goal.x, p.y - goal.y); };

  Node root;
  root.state = start;
  root.g = 0.0;
  root.f = heuristic(start);
  root.cell = cell_key(start, cell_size);
  arena.push_back(root);
  best_g[root.cell] = 0.0;

  std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<HeapEntry>> open;
  open.push({root.f, 0});

  int expansions = 0;
  int goal_node = -1;
  while (!open.empty()) {
    const HeapEntry top = open.top();
    open.pop();
    const Node node = arena[top.node];
    auto it = best_g.find(node.cell);
    if (it != best_g.end() && node.g > it->second + 1e-12) continue;  // stale entry

    if (heuristic(node.state) <= goal_tolerance) {
      goal_node = top.node;
      break;
    }
    if (++expansions > max_expansions)
      fail(ErrorCode::no_path, "node budget exceeded after " + std::to_string(expansions - 1) +
                                   " expansions");

    for (auto& succ : expand(node.state, rng)) {
      const int64_t cell = cell_key(succ.state, cell_size);
      const double g = node.g + succ.travel + succ.safety;
      auto bit = best_g.find(cell);
      if (bit != best_g.end() && bit->second <= g + 1e-12) continue;
      best_g[cell] = g;
      Node next;
      next.state = succ.state;
      next.g = g;
      next.f = g + heuristic(succ.state);
      next.cell = cell;
      next.parent = top.node;
      next.via = static_cast<int>(edge_controls.size());
      edge_controls.push_back(std::move(succ.controls));
      arena.push_back(next);
      open.push({next.f, static_cast<int>(arena.size()) - 1});
    }
  }
  plan.expanded_nodes = expansions;
  if (goal_node < 0)
    fail(ErrorCode::no_path,
         "open set exhausted after " + std::to_string(expansions) + " expansions");

  // backtrack
  std::vector<int> chain;
  for (int n = goal_node; n >= 0; n = arena[n].parent) chain.push_back(n);
  std::reverse(chain.begin(), chain.end());
  plan.cost = arena[goal_node].g;
  for (size_t i = 1; i < chain.size(); ++i) {
    const Node& n = arena[chain[i]];
    for (const auto& u : edge_controls[n.via]) plan.controls.push_back(u);
    plan.predicted_poses.push_back(n.state);
  }
  return plan;
}

Plan hybrid_astar(const gm::EmissionModel& emission, const gm::TransitionModel& transition,
                  const gm::MapRealization& mean_map, const Pose& start, const Vec2& goal,
                  const PlannerConfig& cfg) {
  require(start.x >= 0.0 && start.x <= 1.0 && start.y >= 0.0 && start.y <= 1.0,
          ErrorCode::invalid_argument, "start outside bounds");
  require(goal.x >= 0.0 && goal.x <= 1.0 && goal.y >= 0.0 && goal.y <= 1.0,
          ErrorCode::invalid_argument, "goal outside bounds");

  std::vector<double> chart(mean_map.d);
  const double bases[3] = {-cfg.primitive_dtheta, 0.0, cfg.primitive_dtheta};

  ExpandFn expand = [&, cfg](const Pose& state, Rng& rng) {
    std::vector<Successor> out;
    out.reserve(cfg.primitives);
    for (int e = 0; e < cfg.primitives; ++e) {
      Successor s;
      s.state = state;
      const double base = bases[rng.uniform_int(3)];
      double travel = 0.0;
      for (int k = 0; k < cfg.primitive_steps; ++k) {
        const sim::Control u{base + rng.uniform(-cfg.primitive_jitter, cfg.primitive_jitter),
                             cfg.forward};
        const Pose prev = s.state;
        s.state = gm::transition_mean_in_model(transition, emission, mean_map, s.state, u);
        s.state.x = std::clamp(s.state.x, 1e-6, 1.0 - 1e-6);
        s.state.y = std::clamp(s.state.y, 1e-6, 1.0 - 1e-6);
        travel += std::hypot(s.state.x - prev.x, s.state.y - prev.y);
        s.controls.push_back(u);
      }
      s.travel = travel;
      if (cfg.use_safety) {
        gm::attend_into(mean_map, s.state.x, s.state.y, chart);
        const sim::LidarScan predicted = gm::emission_mean(emission, chart, s.state.theta);
        s.safety = safety_penalty(predicted, cfg.safety);
      }
      out.push_back(std::move(s));
    }
    return out;
  };

  return hybrid_astar_generic(start, goal, cfg.goal_tolerance, cfg.cell_size, cfg.max_expansions,
                              expand, cfg.seed);
}

ExecutionResult execute_plan(const sim::MazeSpec& maze, const Pose& start, const Plan& plan,
                             const Vec2& target) {
  ExecutionResult res;
  Pose pose = start;
  for (const auto& u : plan.controls) pose = sim::step(maze, pose, u);
  res.final_pose = pose;
  res.success = std::hypot(pose.x - target.x, pose.y - target.y) <= kSuccessRadius;
  return res;
}

PoseFit pose_from_observation(const sim::LidarScan& obs, const gm::EmissionModel& emission,
                              const gm::MapRealization& mean_map, const PoseFitConfig& cfg) {
  require(cfg.position_grid_x >= 1 && cfg.position_grid_y >= 1 && cfg.headings >= 1,
          ErrorCode::invalid_argument, "bad start grid");

  struct Optimum {
    Pose pose;
    double logpdf;
  };
  std::vector<Optimum> optima;

  std::vector<double> chart(mean_map.d);
  std::vector<double> chart_grad(mean_map.d);
  gm::EmissionEval eval;

  for (int gx = 0; gx < cfg.position_grid_x; ++gx) {
    for (int gy = 0; gy < cfg.position_grid_y; ++gy) {
      for (int hh = 0; hh < cfg.headings; ++hh) {
        double x = (gx + 0.5) / cfg.position_grid_x;
        double y = (gy + 0.5) / cfg.position_grid_y;
        double theta = -kPi + (hh + 0.5) * (2.0 * kPi / cfg.headings);
        nn::Adam adam(3, {cfg.lr, 0.9, 0.999, 1e-8});
        double best_here = -std::numeric_limits<double>::infinity();
        Pose best_pose{x, y, theta};
        for (int it = 0; it < cfg.iterations; ++it) {
          gm::BilinearWeights wts;
          gm::attend_into(mean_map, x, y, chart, &wts);
          gm::emission_forward(emission, chart, theta, eval);
          const double lp = gm::emission_logpdf(emission, eval, obs);
          if (lp > best_here) {
            best_here = lp;
            best_pose = Pose{x, y, wrap_angle(theta)};
          }
          std::fill(chart_grad.begin(), chart_grad.end(), 0.0);
          double dtheta = 0.0;
          gm::emission_logpdf_backward(emission, eval, obs, 1.0, chart_grad, nullptr, &dtheta);
          // chain chart -> position through the attention weights
          double dx = 0.0, dy = 0.0;
          const int ix[4] = {wts.ix0, wts.ix0 + 1, wts.ix0, wts.ix0 + 1};
          const int iy[4] = {wts.iy0, wts.iy0, wts.iy0 + 1, wts.iy0 + 1};
          for (int k = 0; k < 4; ++k) {
            const auto cell = mean_map.cell(ix[k], iy[k]);
            double dot = 0.0;
            for (int c = 0; c < mean_map.d; ++c) dot += chart_grad[c] * cell[c];
            dx += wts.dwdx[k] * dot;
            dy += wts.dwdy[k] * dot;
          }
          double params[3] = {x, y, theta};
          const double grads[3] = {-dx, -dy, -dtheta};  // ascent via Adam's descent
          adam.step({std::span<double>(params, 3)}, {std::span<const double>(grads, 3)});
          x = std::clamp(params[0], 1e-6, 1.0 - 1e-6);
          y = std::clamp(params[1], 1e-6, 1.0 - 1e-6);
          theta = params[2];
        }
        optima.push_back({best_pose, best_here});
      }
    }
  }

  size_t best = 0;
  for (size_t i = 1; i < optima.size(); ++i)
    if (optima[i].logpdf > optima[best].logpdf) best = i;
  if (!std::isfinite(optima[best].logpdf)) fail(ErrorCode::no_pose, "all starts diverged");

  PoseFit fit;
  fit.pose = optima[best].pose;
  fit.logpdf = optima[best].logpdf;
  fit.runner_up_logpdf = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < optima.size(); ++i) {
    if (i == best) continue;
    const double dist = std::hypot(optima[i].pose.x - fit.pose.x, optima[i].pose.y - fit.pose.y);
    if (dist > kSuccessRadius && optima[i].logpdf > fit.runner_up_logpdf)
      fit.runner_up_logpdf = optima[i].logpdf;
  }
  return fit;
}

}  // namespace latmap::nav
