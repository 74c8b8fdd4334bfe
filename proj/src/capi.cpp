#include "latmap/capi.h"

#include <cstring>
#include <string>

#include "latmap/config.hpp"
#include "latmap/error.hpp"
#include "latmap/runners.hpp"
#include "latmap/sim2d.hpp"
#include "latmap/slam.hpp"

namespace {

thread_local std::string g_last_error;

latmap_status to_status(latmap::ErrorCode code) {
  using latmap::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return LATMAP_ERR_INVALID_ARGUMENT;
    case ErrorCode::invalid_state: return LATMAP_ERR_INVALID_STATE;
    case ErrorCode::numeric:
    case ErrorCode::degenerate_weights: return LATMAP_ERR_NUMERIC;
    case ErrorCode::no_path:
    case ErrorCode::no_pose: return LATMAP_ERR_NO_PATH;
    case ErrorCode::unsupported: return LATMAP_ERR_INVALID_ARGUMENT;
    case ErrorCode::io: return LATMAP_ERR_IO;
  }
  return LATMAP_ERR_UNKNOWN;
}

template <typename Fn>
latmap_status guarded(Fn&& fn) {
  try {
    fn();
    return LATMAP_OK;
  } catch (const latmap::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LATMAP_ERR_UNKNOWN;
  }
}

latmap_status need(bool ok, const char* msg) {
  if (ok) return LATMAP_OK;
  g_last_error = msg;
  return LATMAP_ERR_INVALID_ARGUMENT;
}

}  // namespace

struct latmap_config {
  latmap::RunConfig cfg;
};

struct latmap_maze {
  latmap::sim::MazeSpec maze;
};

struct latmap_slam_engine {
  latmap::slam::SlamEngine engine;
};

extern "C" {

const char* latmap_last_error(void) { return g_last_error.c_str(); }

latmap_status latmap_config_create(latmap_config** out) {
  if (auto s = need(out != nullptr, "out is null")) return s;
  return guarded([&] { *out = new latmap_config{}; });
}

latmap_status latmap_config_load(const char* path, latmap_config** out) {
  if (auto s = need(path && out, "null argument")) return s;
  return guarded([&] { *out = new latmap_config{latmap::load_config(path)}; });
}

latmap_status latmap_config_save(const latmap_config* cfg, const char* path) {
  if (auto s = need(cfg && path, "null argument")) return s;
  return guarded([&] { latmap::save_config(cfg->cfg, path); });
}

latmap_status latmap_config_set(latmap_config* cfg, const char* key, const char* value) {
  if (auto s = need(cfg && key && value, "null argument")) return s;
  return guarded([&] {
    const std::string k(key);
    const size_t dot = k.find('.');
    latmap::require(dot != std::string::npos, latmap::ErrorCode::invalid_argument,
                    "key must be section.name");
    const std::string text = latmap::write_config(cfg->cfg) + "\n[" + k.substr(0, dot) + "]\n" +
                             k.substr(dot + 1) + " = " + value + "\n";
    cfg->cfg = latmap::parse_config(text);
  });
}

latmap_status latmap_config_apply_paper_preset(latmap_config* cfg) {
  if (auto s = need(cfg != nullptr, "cfg is null")) return s;
  return guarded([&] { cfg->cfg.apply_paper_preset(); });
}

void latmap_config_free(latmap_config* cfg) { delete cfg; }

latmap_status latmap_maze_generate(uint64_t seed, const char* complexity, int side_cells,
                                   latmap_maze** out) {
  if (auto s = need(complexity && out, "null argument")) return s;
  return guarded([&] {
    *out = new latmap_maze{latmap::sim::generate_maze(
        seed, latmap::sim::complexity_from_string(complexity), side_cells)};
  });
}

latmap_status latmap_maze_load(const char* path, latmap_maze** out) {
  if (auto s = need(path && out, "null argument")) return s;
  return guarded([&] { *out = new latmap_maze{latmap::sim::load_maze(path)}; });
}

latmap_status latmap_maze_save(const latmap_maze* maze, const char* path) {
  if (auto s = need(maze && path, "null argument")) return s;
  return guarded([&] { latmap::sim::save_maze(maze->maze, path); });
}

latmap_status latmap_maze_raycast(const latmap_maze* maze, double x, double y, double theta,
                                  double readings_out[20]) {
  if (auto s = need(maze && readings_out, "null argument")) return s;
  return guarded([&] {
    const latmap::sim::LidarScan scan =
        latmap::sim::raycast(maze->maze, latmap::Pose{x, y, theta});
    std::memcpy(readings_out, scan.readings.data(), sizeof(double) * 20);
  });
}

latmap_status latmap_maze_step(const latmap_maze* maze, const double pose_in[3], double dtheta,
                               double forward, double pose_out[3]) {
  if (auto s = need(maze && pose_in && pose_out, "null argument")) return s;
  return guarded([&] {
    const latmap::Pose p = latmap::sim::step(
        maze->maze, latmap::Pose{pose_in[0], pose_in[1], pose_in[2]},
        latmap::sim::Control{dtheta, forward});
    pose_out[0] = p.x;
    pose_out[1] = p.y;
    pose_out[2] = p.theta;
  });
}

void latmap_maze_free(latmap_maze* maze) { delete maze; }

latmap_status latmap_slam_engine_create(const latmap_config* cfg, const double start_pose[3],
                                        const double first_scan[20], uint64_t seed,
                                        latmap_slam_engine** out) {
  if (auto s = need(cfg && start_pose && first_scan && out, "null argument")) return s;
  return guarded([&] {
    latmap::slam::SlamConfig scfg = cfg->cfg.slam;
    scfg.seed = seed;
    latmap::sim::LidarScan scan;
    std::memcpy(scan.readings.data(), first_scan, sizeof(double) * 20);
    *out = new latmap_slam_engine{latmap::slam::SlamEngine(
        scfg, latmap::Pose{start_pose[0], start_pose[1], start_pose[2]}, scan)};
  });
}

latmap_status latmap_slam_engine_step(latmap_slam_engine* engine, double dtheta, double forward,
                                      const double scan[20], double estimate_out[3]) {
  if (auto s = need(engine && scan && estimate_out, "null argument")) return s;
  return guarded([&] {
    latmap::sim::LidarScan obs;
    std::memcpy(obs.readings.data(), scan, sizeof(double) * 20);
    engine->engine.observe(latmap::sim::Control{dtheta, forward}, obs);
    const latmap::Pose est = engine->engine.latest_estimate();
    estimate_out[0] = est.x;
    estimate_out[1] = est.y;
    estimate_out[2] = est.theta;
  });
}

latmap_status latmap_slam_engine_train(latmap_slam_engine* engine, int minibatches) {
  if (auto s = need(engine != nullptr, "engine is null")) return s;
  return guarded([&] { engine->engine.train_minibatches(minibatches); });
}

latmap_status latmap_slam_engine_infogain(const latmap_slam_engine* engine, double* out) {
  if (auto s = need(engine && out, "null argument")) return s;
  return guarded([&] { *out = engine->engine.infogain(); });
}

latmap_status latmap_slam_engine_save_model(const latmap_slam_engine* engine, const char* path) {
  if (auto s = need(engine && path, "null argument")) return s;
  return guarded([&] {
    latmap::run::save_model_file(engine->engine.posterior(), engine->engine.emission(), path);
  });
}

void latmap_slam_engine_free(latmap_slam_engine* engine) { delete engine; }

latmap_status latmap_collect_run(const latmap_config* cfg, const char* maze_path, int steps,
                                 uint64_t seed, const char* out_csv) {
  if (auto s = need(cfg && maze_path && out_csv, "null argument")) return s;
  return guarded([&] {
    const latmap::sim::MazeSpec maze = latmap::sim::load_maze(maze_path);
    const latmap::sim::Trajectory traj = latmap::run::collect(maze, steps, seed, cfg->cfg);
    latmap::sim::save_trajectory(traj, out_csv);
  });
}

latmap_status latmap_slam_run(const latmap_config* cfg, const char* maze_path,
                              const char* traj_csv, const char* mode, double noise_scale,
                              uint64_t seed, const char* out_result_json,
                              const char* out_model_json) {
  if (auto s = need(cfg && maze_path && traj_csv && mode && out_result_json, "null argument"))
    return s;
  return guarded([&] {
    const std::string m(mode);
    latmap::require(m == "online" || m == "offline", latmap::ErrorCode::invalid_argument,
                    "mode must be online or offline");
    const latmap::sim::MazeSpec maze = latmap::sim::load_maze(maze_path);
    const latmap::sim::Trajectory traj = latmap::sim::load_trajectory(traj_csv);
    const latmap::run::SlamRunResult res = latmap::run::slam_run(
        maze, traj,
        m == "online" ? latmap::run::SlamMode::online : latmap::run::SlamMode::offline,
        noise_scale, seed, cfg->cfg);
    latmap::run::save_slam_result(res, out_result_json);
    if (out_model_json) latmap::run::save_model_file(res.posterior, res.emission, out_model_json);
  });
}

latmap_status latmap_explore_run(const latmap_config* cfg, const char* maze_path,
                                 const char* policy, int budget, uint64_t seed,
                                 const char* pema_checkpoint, const char* out_trace_jsonl) {
  if (auto s = need(cfg && maze_path && policy && out_trace_jsonl, "null argument")) return s;
  return guarded([&] {
    const std::string p(policy);
    latmap::run::ExplorePolicy pol;
    if (p == "mi")
      pol = latmap::run::ExplorePolicy::mi;
    else if (p == "random")
      pol = latmap::run::ExplorePolicy::random;
    else if (p == "pema")
      pol = latmap::run::ExplorePolicy::pema;
    else
      latmap::fail(latmap::ErrorCode::invalid_argument, "policy must be mi, random or pema");
    latmap::pema::PemaPolicy pema_policy;
    if (pol == latmap::run::ExplorePolicy::pema) {
      latmap::require(pema_checkpoint != nullptr, latmap::ErrorCode::invalid_argument,
                      "pema policy requires a checkpoint");
      pema_policy = latmap::pema::load_policy(pema_checkpoint);
    }
    const latmap::sim::MazeSpec maze = latmap::sim::load_maze(maze_path);
    const latmap::run::ExploreRunResult res = latmap::run::explore_run(
        maze, pol, budget, seed, cfg->cfg,
        pol == latmap::run::ExplorePolicy::pema ? &pema_policy : nullptr);
    latmap::run::save_explore_trace(res, out_trace_jsonl);
  });
}

latmap_status latmap_navigate_run(const latmap_config* cfg, const char* maze_path,
                                  const char* model_json, int target_obs, int max_pairs,
                                  uint64_t seed, const char* out_report_json) {
  if (auto s = need(cfg && maze_path && model_json && out_report_json, "null argument")) return s;
  return guarded([&] {
    const latmap::sim::MazeSpec maze = latmap::sim::load_maze(maze_path);
    latmap::slam::LatentMapPosterior post;
    latmap::gm::EmissionModel emission;
    latmap::run::load_model_file(model_json, &post, &emission);
    const latmap::run::NavigateRunResult res = latmap::run::navigate_run(
        maze, post, emission, target_obs != 0, max_pairs, seed, cfg->cfg);
    latmap::run::save_navigate_result(res, out_report_json);
  });
}

latmap_status latmap_pema_train(const latmap_config* cfg, const char* const* maze_paths,
                                int n_mazes, int hidden, int iterations, uint64_t seed,
                                const char* out_checkpoint_json, const char* out_curve_csv) {
  if (auto s = need(cfg && maze_paths && n_mazes > 0 && out_checkpoint_json, "null argument"))
    return s;
  return guarded([&] {
    std::vector<latmap::sim::MazeSpec> worlds;
    for (int i = 0; i < n_mazes; ++i) worlds.push_back(latmap::sim::load_maze(maze_paths[i]));
    const latmap::run::PemaTrainResult res =
        latmap::run::pema_train_run(worlds, hidden, iterations, seed, cfg->cfg);
    latmap::pema::save_policy(res.policy, out_checkpoint_json);
    if (out_curve_csv) latmap::run::save_pema_curve(res.report, out_curve_csv);
  });
}

latmap_status latmap_report_run(const char* const* result_paths, int n, const char* out_json,
                                const char* out_csv) {
  if (auto s = need(result_paths && n > 0, "null argument")) return s;
  return guarded([&] {
    std::vector<std::string> paths(result_paths, result_paths + n);
    latmap::run::report_run(paths, out_json ? out_json : "", out_csv ? out_csv : "");
  });
}

}  // extern "C"
