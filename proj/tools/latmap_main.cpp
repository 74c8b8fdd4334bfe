// latmap CLI: drives the shared-library C API. Exit codes: 0 success,
// 1 runtime/numeric failure, 2 usage or input errors.

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latmap/capi.h"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int fail_status(latmap_status s) {
  std::fprintf(stderr, "error: %s\n", latmap_last_error());
  switch (s) {
    case LATMAP_ERR_INVALID_ARGUMENT:
    case LATMAP_ERR_IO:
      return kExitUsage;
    default:
      return kExitRuntime;
  }
}

struct ConfigHandle {
  latmap_config* cfg = nullptr;
  ~ConfigHandle() { latmap_config_free(cfg); }
};

// --config path (overridden by LATMAP_CONFIG), then --set key=value overrides
int make_config(const std::string& config_path, const std::vector<std::string>& sets, bool paper,
                ConfigHandle& out) {
  std::string path = config_path;
  if (const char* env = std::getenv("LATMAP_CONFIG")) path = env;
  latmap_status s = path.empty() ? latmap_config_create(&out.cfg)
                                 : latmap_config_load(path.c_str(), &out.cfg);
  if (s != LATMAP_OK) return fail_status(s);
  if (paper) {
    s = latmap_config_apply_paper_preset(out.cfg);
    if (s != LATMAP_OK) return fail_status(s);
  }
  for (const auto& kv : sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return kExitUsage;
    }
    s = latmap_config_set(out.cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != LATMAP_OK) return fail_status(s);
  }
  return 0;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= csv.size()) {
    const size_t comma = csv.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(csv.substr(start));
      break;
    }
    out.push_back(csv.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latmap: latent-map SLAM, exploration and navigation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> config_sets;
  bool paper_preset = false;
  app.add_option("--config", config_path, "config file (LATMAP_CONFIG overrides)");
  app.add_option("--set", config_sets, "config override, key=value (repeatable)");
  app.add_flag("--paper", paper_preset, "apply the paper-scale preset");

  // maze
  auto* maze_cmd = app.add_subcommand("maze", "generate a maze file");
  uint64_t maze_seed = 0;
  std::string maze_complexity = "simple";
  int maze_cells = 4;
  std::string maze_out;
  maze_cmd->add_option("--seed", maze_seed, "generator seed");
  maze_cmd->add_option("--complexity", maze_complexity, "simple|moderate|complex");
  maze_cmd->add_option("--cells", maze_cells, "lattice cells per side");
  maze_cmd->add_option("--out", maze_out, "output maze JSON")->required();

  // collect
  auto* collect_cmd = app.add_subcommand("collect", "random-walk trajectory collection");
  std::string collect_maze, collect_out;
  int collect_steps = 500;
  uint64_t collect_seed = 0;
  collect_cmd->add_option("--maze", collect_maze, "maze JSON")->required();
  collect_cmd->add_option("--steps", collect_steps, "number of steps");
  collect_cmd->add_option("--seed", collect_seed, "rng seed");
  collect_cmd->add_option("--out", collect_out, "output trajectory CSV")->required();

  // slam
  auto* slam_cmd = app.add_subcommand("slam", "run online or offline SLAM");
  std::string slam_maze, slam_traj, slam_mode = "online", slam_out, slam_model;
  double slam_noise = 1.0;
  uint64_t slam_seed = 0;
  slam_cmd->add_option("--maze", slam_maze, "maze JSON")->required();
  slam_cmd->add_option("--traj", slam_traj, "trajectory CSV")->required();
  slam_cmd->add_option("--mode", slam_mode, "online|offline");
  slam_cmd->add_option("--control-noise", slam_noise, "control noise scale (0 disables)");
  slam_cmd->add_option("--seed", slam_seed, "rng seed");
  slam_cmd->add_option("--out", slam_out, "result JSON")->required();
  slam_cmd->add_option("--posterior", slam_model, "posterior/model dump JSON");

  // explore
  auto* explore_cmd = app.add_subcommand("explore", "autonomous exploration");
  std::string explore_maze, explore_policy = "mi", explore_out, explore_ckpt;
  int explore_budget = 500;
  uint64_t explore_seed = 0;
  explore_cmd->add_option("--maze", explore_maze, "maze JSON")->required();
  explore_cmd->add_option("--policy", explore_policy, "mi|random|pema");
  explore_cmd->add_option("--budget", explore_budget, "environment step budget");
  explore_cmd->add_option("--seed", explore_seed, "rng seed");
  explore_cmd->add_option("--pema-checkpoint", explore_ckpt, "policy checkpoint for --policy pema");
  explore_cmd->add_option("--out", explore_out, "trace JSON-lines file")->required();

  // navigate
  auto* nav_cmd = app.add_subcommand("navigate", "plan and execute navigation pairs");
  std::string nav_maze, nav_model, nav_pairs = "grid5", nav_out;
  bool nav_target_obs = false;
  int nav_max_pairs = 0;
  uint64_t nav_seed = 0;
  nav_cmd->add_option("--maze", nav_maze, "maze JSON")->required();
  nav_cmd->add_option("--model", nav_model, "posterior/model dump from slam")->required();
  nav_cmd->add_option("--pairs", nav_pairs, "pair source (grid5)");
  nav_cmd->add_flag("--target-obs", nav_target_obs, "infer goals from observations");
  nav_cmd->add_option("--max-pairs", nav_max_pairs, "cap on attempted pairs (0 = all)");
  nav_cmd->add_option("--seed", nav_seed, "rng seed");
  nav_cmd->add_option("--out", nav_out, "report JSON")->required();

  // pema-train
  auto* pema_cmd = app.add_subcommand("pema-train", "train the PEMA baseline with ARS");
  std::string pema_mazes, pema_out, pema_curve;
  int pema_hidden = 64, pema_iters = 0;
  uint64_t pema_seed = 0;
  pema_cmd->add_option("--mazes", pema_mazes, "comma-separated maze JSON paths")->required();
  pema_cmd->add_option("--hidden", pema_hidden, "LSTM hidden units");
  pema_cmd->add_option("--iterations", pema_iters, "ARS iterations (0 = config default)");
  pema_cmd->add_option("--seed", pema_seed, "rng seed");
  pema_cmd->add_option("--out", pema_out, "policy checkpoint JSON")->required();
  pema_cmd->add_option("--curve", pema_curve, "training curve CSV");

  // report
  auto* report_cmd = app.add_subcommand("report", "aggregate SLAM results into quantile bands");
  std::string report_inputs, report_out, report_csv;
  report_cmd->add_option("--inputs", report_inputs, "comma-separated result JSON paths")
      ->required();
  report_cmd->add_option("--out", report_out, "aggregate JSON");
  report_cmd->add_option("--csv", report_csv, "plottable CSV (step, median, quantiles)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  ConfigHandle cfg;
  if (int rc = make_config(config_path, config_sets, paper_preset, cfg)) return rc;

  if (maze_cmd->parsed()) {
    latmap_maze* maze = nullptr;
    latmap_status s = latmap_maze_generate(maze_seed, maze_complexity.c_str(), maze_cells, &maze);
    if (s != LATMAP_OK) return fail_status(s);
    s = latmap_maze_save(maze, maze_out.c_str());
    latmap_maze_free(maze);
    if (s != LATMAP_OK) return fail_status(s);
    std::printf("%s\n", maze_out.c_str());
    return 0;
  }

  if (collect_cmd->parsed()) {
    const latmap_status s = latmap_collect_run(cfg.cfg, collect_maze.c_str(), collect_steps,
                                               collect_seed, collect_out.c_str());
    if (s != LATMAP_OK) return fail_status(s);
    std::printf("%s\n", collect_out.c_str());
    return 0;
  }

  if (slam_cmd->parsed()) {
    const latmap_status s = latmap_slam_run(cfg.cfg, slam_maze.c_str(), slam_traj.c_str(),
                                            slam_mode.c_str(), slam_noise, slam_seed,
                                            slam_out.c_str(),
                                            slam_model.empty() ? nullptr : slam_model.c_str());
    if (s != LATMAP_OK) return fail_status(s);
    // print the headline metrics from the result file
    std::FILE* f = std::fopen(slam_out.c_str(), "rb");
    if (f) std::fclose(f);
    std::printf("%s\n", slam_out.c_str());
    return 0;
  }

  if (explore_cmd->parsed()) {
    const latmap_status s = latmap_explore_run(
        cfg.cfg, explore_maze.c_str(), explore_policy.c_str(), explore_budget, explore_seed,
        explore_ckpt.empty() ? nullptr : explore_ckpt.c_str(), explore_out.c_str());
    if (s != LATMAP_OK) return fail_status(s);
    std::printf("%s\n", explore_out.c_str());
    return 0;
  }

  if (nav_cmd->parsed()) {
    if (nav_pairs != "grid5") {
      std::fprintf(stderr, "error: unsupported --pairs value '%s'\n", nav_pairs.c_str());
      return kExitUsage;
    }
    const latmap_status s =
        latmap_navigate_run(cfg.cfg, nav_maze.c_str(), nav_model.c_str(), nav_target_obs ? 1 : 0,
                            nav_max_pairs, nav_seed, nav_out.c_str());
    if (s != LATMAP_OK) return fail_status(s);
    std::printf("%s\n", nav_out.c_str());
    return 0;
  }

  if (pema_cmd->parsed()) {
    const std::vector<std::string> paths = split_list(pema_mazes);
    std::vector<const char*> cpaths;
    for (const auto& p : paths) cpaths.push_back(p.c_str());
    const latmap_status s = latmap_pema_train(
        cfg.cfg, cpaths.data(), static_cast<int>(cpaths.size()), pema_hidden, pema_iters,
        pema_seed, pema_out.c_str(), pema_curve.empty() ? nullptr : pema_curve.c_str());
    if (s != LATMAP_OK) return fail_status(s);
    std::printf("%s\n", pema_out.c_str());
    return 0;
  }

  if (report_cmd->parsed()) {
    const std::vector<std::string> paths = split_list(report_inputs);
    std::vector<const char*> cpaths;
    for (const auto& p : paths) cpaths.push_back(p.c_str());
    const latmap_status s =
        latmap_report_run(cpaths.data(), static_cast<int>(cpaths.size()),
                          report_out.empty() ? nullptr : report_out.c_str(),
                          report_csv.empty() ? nullptr : report_csv.c_str());
    if (s != LATMAP_OK) return fail_status(s);
    if (!report_out.empty()) std::printf("%s\n", report_out.c_str());
    return 0;
  }

  return kExitUsage;
}
