#pragma once

#include <string>
#include <vector>

#include "latmap/explore.hpp"
#include "latmap/navigate.hpp"
#include "latmap/pema.hpp"
#include "latmap/sim2d.hpp"
#include "latmap/slam.hpp"

namespace latmap {

// Run-wide configuration. Defaults are desk scale; `apply_paper_preset`
// switches to the full-size settings.
struct RunConfig {
  sim::RandomWalkConfig walk;
  slam::SlamConfig slam;
  explore::ExploreConfig explore;
  nav::PlannerConfig planner;
  nav::PoseFitConfig pose_fit;
  pema::ArsConfig pema;

  // control noise injected by the environment during SLAM experiments,
  // hidden from the agent
  double control_noise_dtheta = 0.02;
  double control_noise_forward = 0.002;

  void apply_paper_preset();
};

// Flat key-value config file with [section] headers. Unknown keys are
// rejected; write(parse(x)) == write-stable.
RunConfig parse_config(const std::string& text);
std::string write_config(const RunConfig& cfg);

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

}  // namespace latmap
