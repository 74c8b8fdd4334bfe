#include "latmap/runners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>

#include <json.hpp>

#include "latmap/checkpoint.hpp"
#include "latmap/error.hpp"
#include "latmap/report.hpp"

namespace latmap::run {

using nlohmann::json;

Pose default_start_pose(const sim::MazeSpec& maze, uint64_t seed) {
  Rng rng(seed ^ 0x73746172ULL);
  return pema::random_free_pose(maze, 0.03, rng);
}

sim::Trajectory collect(const sim::MazeSpec& maze, int steps, uint64_t seed,
                        const RunConfig& cfg) {
  require(steps >= 1, ErrorCode::invalid_argument, "steps must be >= 1");
  Rng rng(seed ^ 0x636f6cULL);
  sim::RandomWalkPolicy policy(cfg.walk);
  sim::Trajectory traj;
  Pose pose = default_start_pose(maze, seed);
  traj.poses.push_back(pose);
  traj.scans.push_back(sim::raycast(maze, pose));
  for (int t = 0; t < steps; ++t) {
    const sim::Control u = policy.next(rng, traj.scans.back());
    traj.controls.push_back(u);
    pose = sim::step(maze, pose, u);
    traj.poses.push_back(pose);
    traj.scans.push_back(sim::raycast(maze, pose));
  }
  return traj;
}

SlamRunResult slam_run(const sim::MazeSpec& maze, const sim::Trajectory& traj, SlamMode mode,
                       double noise_scale, uint64_t seed, const RunConfig& cfg) {
  require(traj.poses.size() >= 2, ErrorCode::invalid_argument, "trajectory too short");
  Rng env_rng(seed ^ 0x656e76ULL);
  SlamRunResult res;

  // Re-execute the commanded controls with hidden control noise; the agent
  // sees commanded controls and the resulting scans only.
  const Pose start = traj.poses.front();
  res.truth.push_back(start);
  std::vector<sim::LidarScan> scans{sim::raycast(maze, start)};
  Pose true_pose = start;
  Pose dr_pose = start;
  res.dead_reckoning.push_back(dr_pose);
  for (const auto& u : traj.controls) {
    sim::Control executed = u;
    executed.dtheta += noise_scale * cfg.control_noise_dtheta * env_rng.normal();
    executed.forward += noise_scale * cfg.control_noise_forward * env_rng.normal();
    executed.forward = std::clamp(executed.forward, -sim::kMaxForward, sim::kMaxForward);
    true_pose = sim::step(maze, true_pose, executed);
    res.truth.push_back(true_pose);
    scans.push_back(sim::raycast(maze, true_pose));
    dr_pose = gm::transition_smooth(dr_pose, u);  // path integration of commanded controls
    res.dead_reckoning.push_back(dr_pose);
  }

  slam::SlamConfig scfg = cfg.slam;
  scfg.seed = seed;
  if (mode == SlamMode::offline) scfg.updates_per_step = 0;
  slam::SlamEngine engine(scfg, start, scans.front());
  for (size_t t = 0; t < traj.controls.size(); ++t) engine.observe(traj.controls[t], scans[t + 1]);

  if (mode == SlamMode::offline)
    res.estimates = slam::offline_slam(engine);
  else
    res.estimates = engine.estimates();

  res.posterior = engine.posterior();
  res.emission = engine.emission();

  for (size_t t = 0; t < res.truth.size(); ++t)
    res.abs_err.push_back(
        std::hypot(res.estimates[t].x - res.truth[t].x, res.estimates[t].y - res.truth[t].y));
  res.final_abs_err = res.abs_err.back();
  res.relative_err = slam::localisation_error(res.estimates, res.truth).second;
  res.dr_final_abs_err = std::hypot(res.dead_reckoning.back().x - res.truth.back().x,
                                    res.dead_reckoning.back().y - res.truth.back().y);
  return res;
}

void save_slam_result(const SlamRunResult& res, const std::string& path) {
  json j;
  j["format_version"] = 1;
  json steps = json::array();
  for (size_t t = 0; t < res.estimates.size(); ++t) {
    json rec;
    rec["t"] = t;
    rec["est_x"] = res.estimates[t].x;
    rec["est_y"] = res.estimates[t].y;
    rec["est_theta"] = res.estimates[t].theta;
    rec["abs_err"] = res.abs_err[t];
    steps.push_back(rec);
  }
  j["per_step"] = steps;
  j["final_abs_err"] = res.final_abs_err;
  j["relative_err"] = res.relative_err;
  j["dead_reckoning"] = {{"final_abs_err", res.dr_final_abs_err}};
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

void save_model_file(const slam::LatentMapPosterior& post, const gm::EmissionModel& emission,
                     const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["w"] = post.w;
  j["h"] = post.h;
  j["d"] = post.d;
  j["mu"] = post.mu;
  j["log_sigma2"] = post.log_sigma2;
  j["emission"] = {{"net", nn::net_to_json(emission.net)}, {"sigma_e", emission.sigma_e}};
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

void load_model_file(const std::string& path, slam::LatentMapPosterior* post,
                     gm::EmissionModel* emission) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::io, "bad model file " + path + ": " + e.what());
  }
  if (post) {
    post->w = j.at("w").get<int>();
    post->h = j.at("h").get<int>();
    post->d = j.at("d").get<int>();
    post->mu = j.at("mu").get<std::vector<double>>();
    post->log_sigma2 = j.at("log_sigma2").get<std::vector<double>>();
    require(post->mu.size() == static_cast<size_t>(post->w) * post->h * post->d &&
                post->log_sigma2.size() == post->mu.size(),
            ErrorCode::io, "model file shape mismatch");
  }
  if (emission) {
    emission->net = nn::net_from_json(j.at("emission").at("net"));
    emission->sigma_e = j.at("emission").at("sigma_e").get<double>();
  }
}

ExploreRunResult explore_run(const sim::MazeSpec& maze, ExplorePolicy policy, int budget,
                             uint64_t seed, const RunConfig& cfg,
                             const pema::PemaPolicy* pema_policy) {
  ExploreRunResult res;
  const Pose start = default_start_pose(maze, seed);
  Rng rng(seed ^ 0x657870ULL);

  if (policy == ExplorePolicy::mi) {
    slam::SlamConfig scfg = cfg.slam;
    scfg.seed = seed;
    scfg.updates_per_step = 0;  // training happens once per cycle
    scfg.sigma_t = cfg.explore.mi.sigma_t;
    // the exploration environment is noiseless; keep the filter tight
    scfg.prop_noise_dtheta = 0.0;
    scfg.prop_noise_forward = 0.0;
    slam::SlamEngine engine(scfg, start, sim::raycast(maze, start));
    res.trace = explore::explore_loop(maze, start, engine, cfg.explore, budget, rng,
                                      &res.true_poses);
    return res;
  }

  // Baselines: plain rollouts chunked into horizon-sized cycles; ratio uses
  // true poses, model metrics stay zero.
  std::vector<Pose> poses{start};
  Pose pose = start;
  sim::RandomWalkPolicy walker(cfg.walk);
  std::unique_ptr<pema::PolicyRunner> runner;
  if (policy == ExplorePolicy::pema) {
    require(pema_policy != nullptr, ErrorCode::invalid_argument,
            "pema policy requires a checkpoint");
    runner = std::make_unique<pema::PolicyRunner>(*pema_policy);
  }

  sim::Control u{0.0, 0.0};
  int executed = 0;
  int cycle = 0;
  const int horizon = cfg.explore.mi.horizon;
  while (executed + horizon <= budget) {
    for (int t = 0; t < horizon; ++t) {
      const sim::LidarScan scan = sim::raycast(maze, pose);
      u = (policy == ExplorePolicy::random) ? walker.next(rng, scan) : runner->next(scan);
      pose = sim::step(maze, pose, u);
      poses.push_back(pose);
      ++executed;
    }
    explore::ExploreCycleRecord rec;
    rec.cycle = cycle++;
    rec.steps_executed = executed;
    rec.exploration_ratio = explore::exploration_ratio(poses, cfg.explore.eval_tiles);
    res.trace.push_back(rec);
  }
  res.true_poses = poses;
  return res;
}

void save_explore_trace(const ExploreRunResult& res, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  for (const auto& rec : res.trace) {
    json j;
    j["format_version"] = 1;
    j["cycle"] = rec.cycle;
    j["steps_executed"] = rec.steps_executed;
    j["infogain"] = rec.infogain;
    j["exploration_ratio"] = rec.exploration_ratio;
    j["selected_mi"] = rec.selected_mi;
    j["candidate_mis"] = rec.candidate_mis;
    out << j.dump() << "\n";
  }
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

namespace {

// Free poses on an n x n grid over the unit square; a pose is free when it
// keeps some clearance from every wall.
std::vector<Vec2> grid_free_positions(const sim::MazeSpec& maze, int n, double clearance) {
  std::vector<Vec2> out;
  for (int iy = 0; iy < n; ++iy) {
    for (int ix = 0; ix < n; ++ix) {
      const Vec2 p{(ix + 0.5) / n, (iy + 0.5) / n};
      double min_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 16; ++k)
        min_d = std::min(min_d, sim::ray_distance(maze, p.x, p.y, k * kPi / 8.0));
      if (min_d > clearance) out.push_back(p);
    }
  }
  return out;
}

}  // namespace

NavigateRunResult navigate_run(const sim::MazeSpec& maze, const slam::LatentMapPosterior& post,
                               const gm::EmissionModel& emission, bool target_obs,
                               int max_pairs, uint64_t seed, const RunConfig& cfg) {
  NavigateRunResult res;
  const gm::MapRealization mean_map = post.mean_map();
  gm::TransitionModel transition;  // engineered, sigma_t = 0
  const std::vector<Vec2> grid = grid_free_positions(maze, 5, 0.04);
  require(grid.size() >= 2, ErrorCode::invalid_state, "no free grid poses found");

  std::vector<std::pair<size_t, size_t>> pairs;
  for (size_t a = 0; a < grid.size(); ++a)
    for (size_t b = 0; b < grid.size(); ++b)
      if (a != b) pairs.emplace_back(a, b);
  if (max_pairs > 0 && pairs.size() > static_cast<size_t>(max_pairs)) {
    // deterministic stride subsample
    std::vector<std::pair<size_t, size_t>> pick;
    const double stride = static_cast<double>(pairs.size()) / max_pairs;
    for (int i = 0; i < max_pairs; ++i) pick.push_back(pairs[static_cast<size_t>(i * stride)]);
    pairs = std::move(pick);
  }

  int successes = 0;
  for (const auto& [a, b] : pairs) {
    NavigatePairResult pr;
    pr.start = Pose{grid[a].x, grid[a].y, 0.0};
    pr.goal = grid[b];

    Vec2 goal = pr.goal;
    if (target_obs) {
      const sim::LidarScan obs = sim::raycast(maze, Pose{pr.goal.x, pr.goal.y, 0.0});
      const nav::PoseFit fit = nav::pose_from_observation(obs, emission, mean_map, cfg.pose_fit);
      goal = Vec2{fit.pose.x, fit.pose.y};
      pr.fit_logpdf = fit.logpdf;
      pr.fit_runner_up = fit.runner_up_logpdf;
    }

    nav::PlannerConfig pcfg = cfg.planner;
    pcfg.seed = seed;
    try {
      const nav::Plan plan = nav::hybrid_astar(emission, transition, mean_map, pr.start, goal,
                                               pcfg);
      pr.planned = true;
      pr.plan_cost = plan.cost;
      pr.expanded_nodes = plan.expanded_nodes;
      const nav::ExecutionResult ex = nav::execute_plan(maze, pr.start, plan, pr.goal);
      pr.success = ex.success;
      pr.final_distance = std::hypot(ex.final_pose.x - pr.goal.x, ex.final_pose.y - pr.goal.y);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::no_path) throw;
      pr.planned = false;
      pr.success = false;
    }
    if (pr.success) ++successes;
    res.pairs.push_back(pr);
  }
  res.success_fraction = res.pairs.empty() ? 0.0
                                           : static_cast<double>(successes) / res.pairs.size();
  return res;
}

void save_navigate_result(const NavigateRunResult& res, const std::string& path) {
  json j;
  j["format_version"] = 1;
  json pairs = json::array();
  for (const auto& p : res.pairs) {
    json rec;
    rec["start"] = {p.start.x, p.start.y, p.start.theta};
    rec["goal"] = {p.goal.x, p.goal.y};
    rec["planned"] = p.planned;
    rec["success"] = p.success;
    rec["final_distance"] = p.final_distance;
    rec["plan_cost"] = p.plan_cost;
    rec["expanded_nodes"] = p.expanded_nodes;
    pairs.push_back(rec);
  }
  j["pairs"] = pairs;
  j["success_fraction"] = res.success_fraction;
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

PemaTrainResult pema_train_run(const std::vector<sim::MazeSpec>& worlds, int hidden,
                               int iterations, uint64_t seed, const RunConfig& cfg) {
  Rng rng(seed ^ 0x70656d61ULL);
  PemaTrainResult res;
  res.policy = pema::make_policy(hidden, rng);
  pema::ArsConfig acfg = cfg.pema;
  if (iterations > 0) acfg.iterations = iterations;
  acfg.seed = seed;
  res.report = pema::ars_train(res.policy, worlds, acfg, rng);
  return res;
}

void save_pema_curve(const pema::ArsReport& report, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << "iteration,mean_reward\n";
  char buf[64];
  for (size_t i = 0; i < report.mean_reward.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, report.mean_reward[i]);
    out << buf;
  }
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

void report_run(const std::vector<std::string>& result_paths, const std::string& out_json,
                const std::string& out_csv) {
  require(!result_paths.empty(), ErrorCode::invalid_argument, "need at least one result file");
  std::vector<std::vector<double>> series;
  for (const auto& path : result_paths) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open result file: " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      fail(ErrorCode::io, "bad result file " + path + ": " + e.what());
    }
    require(j.contains("per_step"), ErrorCode::invalid_argument,
            "result file missing per_step: " + path);
    std::vector<double> s;
    for (const auto& rec : j.at("per_step")) s.push_back(rec.at("abs_err").get<double>());
    series.push_back(std::move(s));
  }
  const report::AggregateReport rep = report::aggregate(series);
  if (!out_json.empty()) report::save_report_json(rep, out_json);
  if (!out_csv.empty()) report::save_report_csv(rep, out_csv);
}

}  // namespace latmap::run
