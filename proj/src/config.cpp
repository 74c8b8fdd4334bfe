#include "latmap/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "latmap/error.hpp"

namespace latmap {

void RunConfig::apply_paper_preset() {
  slam.emission_hidden = {256, 256, 256, 256};
  slam.batch_chunks = 128;
  slam.learning_rate = 1e-4;
  slam.offline_particles = 1000;
  slam.offline_sigma_e = 0.01;
  explore.mi.horizon = 50;
  explore.mi.marginal_samples = 30;
  explore.mi.map_samples = 40;
  explore.mi.conditional_samples = 100;
  explore.mi.candidates = 40;
  explore.n_train = 500;
  pema.rollout_steps = 1000;
  pema.reward_tiles = 100;
  // hidden size of a fresh pema policy is owned by the caller (256 at paper
  // scale); see runners.
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(int v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::string fmt(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

// Field registry: binds "section.key" to a typed member so parse and write
// stay in sync by construction.
struct Binder {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

void parse_into(const std::string& value, double* out) {
  try {
    size_t pos = 0;
    *out = std::stod(value, &pos);
    require(pos == value.size(), ErrorCode::invalid_argument, "trailing junk");
  } catch (const std::exception&) {
    fail(ErrorCode::invalid_argument, "bad float value: " + value);
  }
}

void parse_into(const std::string& value, int* out) {
  try {
    size_t pos = 0;
    *out = std::stoi(value, &pos);
    require(pos == value.size(), ErrorCode::invalid_argument, "trailing junk");
  } catch (const std::exception&) {
    fail(ErrorCode::invalid_argument, "bad int value: " + value);
  }
}

void parse_into(const std::string& value, bool* out) {
  if (value == "true" || value == "1")
    *out = true;
  else if (value == "false" || value == "0")
    *out = false;
  else
    fail(ErrorCode::invalid_argument, "bad bool value: " + value);
}

void parse_into(const std::string& value, std::vector<int>* out) {
  out->clear();
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int v = 0;
    parse_into(item, &v);
    out->push_back(v);
  }
  require(!out->empty(), ErrorCode::invalid_argument, "empty int list");
}

template <typename T>
Binder make_binder(T* (*access)(RunConfig&)) {
  return Binder{
      [access](RunConfig& c, const std::string& v) { parse_into(v, access(c)); },
      [access](const RunConfig& c) { return fmt(*access(const_cast<RunConfig&>(c))); },
  };
}

#define FIELD(key, expr)                                          \
  {key, make_binder<decltype(std::declval<RunConfig&>().expr)>(   \
            +[](RunConfig& c) { return &c.expr; })}

const std::map<std::string, Binder>& registry() {
  static const std::map<std::string, Binder> reg = {
      FIELD("sim.walk_forward", walk.forward),
      FIELD("sim.walk_max_dtheta", walk.max_dtheta),
      FIELD("sim.walk_smooth", walk.smooth),
      FIELD("sim.walk_noise_std", walk.noise_std),
      FIELD("sim.walk_avoid_distance", walk.avoid_distance),
      FIELD("sim.walk_avoid_gain", walk.avoid_gain),

      FIELD("slam.map_w", slam.map_w),
      FIELD("slam.map_h", slam.map_h),
      FIELD("slam.map_d", slam.map_d),
      FIELD("slam.emission_hidden", slam.emission_hidden),
      FIELD("slam.sigma_e", slam.sigma_e),
      FIELD("slam.sigma_t", slam.sigma_t),
      FIELD("slam.chunk_len", slam.chunk_len),
      FIELD("slam.batch_chunks", slam.batch_chunks),
      FIELD("slam.learning_rate", slam.learning_rate),
      FIELD("slam.n_particles", slam.n_particles),
      FIELD("slam.refresh_period", slam.refresh_period),
      FIELD("slam.updates_per_step", slam.updates_per_step),
      FIELD("slam.proposal_samples", slam.proposal_samples),
      FIELD("slam.prop_noise_dtheta", slam.prop_noise_dtheta),
      FIELD("slam.prop_noise_forward", slam.prop_noise_forward),
      FIELD("slam.offline_particles", slam.offline_particles),
      FIELD("slam.offline_chunk_noise", slam.offline_chunk_noise),
      FIELD("slam.offline_sigma_e", slam.offline_sigma_e),
      FIELD("slam.offline_rounds", slam.offline_rounds),
      FIELD("slam.offline_updates_per_round", slam.offline_updates_per_round),
      FIELD("slam.learn_emission", slam.learn_emission),

      FIELD("explore.horizon", explore.mi.horizon),
      FIELD("explore.marginal_samples", explore.mi.marginal_samples),
      FIELD("explore.map_samples", explore.mi.map_samples),
      FIELD("explore.conditional_samples", explore.mi.conditional_samples),
      FIELD("explore.candidates", explore.mi.candidates),
      FIELD("explore.bias_matched", explore.mi.bias_matched),
      FIELD("explore.entropy_k", explore.mi.entropy.k),
      FIELD("explore.sigma_t", explore.mi.sigma_t),
      FIELD("explore.cand_opt_steps", explore.candidates.opt_steps),
      FIELD("explore.cand_lr", explore.candidates.lr),
      FIELD("explore.cand_angle_reg", explore.candidates.angle_reg),
      FIELD("explore.cand_init_dtheta_std", explore.candidates.init_dtheta_std),
      FIELD("explore.cand_forward", explore.candidates.forward),
      FIELD("explore.n_train", explore.n_train),
      FIELD("explore.eval_tiles", explore.eval_tiles),
      FIELD("explore.field_w", explore.field_w),
      FIELD("explore.field_h", explore.field_h),
      FIELD("explore.threads", explore.threads),

      FIELD("navigate.cell_size", planner.cell_size),
      FIELD("navigate.primitives", planner.primitives),
      FIELD("navigate.primitive_steps", planner.primitive_steps),
      FIELD("navigate.primitive_dtheta", planner.primitive_dtheta),
      FIELD("navigate.primitive_jitter", planner.primitive_jitter),
      FIELD("navigate.forward", planner.forward),
      FIELD("navigate.goal_tolerance", planner.goal_tolerance),
      FIELD("navigate.max_expansions", planner.max_expansions),
      FIELD("navigate.safety_mu", planner.safety.mu),
      FIELD("navigate.safety_delta", planner.safety.delta),
      FIELD("navigate.safety_sigma", planner.safety.sigma),
      FIELD("navigate.use_safety", planner.use_safety),
      FIELD("navigate.fit_position_grid_x", pose_fit.position_grid_x),
      FIELD("navigate.fit_position_grid_y", pose_fit.position_grid_y),
      FIELD("navigate.fit_headings", pose_fit.headings),
      FIELD("navigate.fit_iterations", pose_fit.iterations),
      FIELD("navigate.fit_lr", pose_fit.lr),

      FIELD("pema.k_pert", pema.k_pert),
      FIELD("pema.sigma_pert", pema.sigma_pert),
      FIELD("pema.eta", pema.eta),
      FIELD("pema.rollout_steps", pema.rollout_steps),
      FIELD("pema.reward_tiles", pema.reward_tiles),
      FIELD("pema.iterations", pema.iterations),

      FIELD("cli.control_noise_dtheta", control_noise_dtheta),
      FIELD("cli.control_noise_forward", control_noise_forward),
  };
  return reg;
}

#undef FIELD

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const size_t comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    if (line.front() == '[') {
      require(line.back() == ']', ErrorCode::invalid_argument,
              "bad section header at line " + std::to_string(line_no));
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::invalid_argument,
            "expected key = value at line " + std::to_string(line_no));
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key = key.substr(0, key.find_last_not_of(" \t") + 1);
    const size_t vb = value.find_first_not_of(" \t");
    value = vb == std::string::npos ? "" : value.substr(vb);
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = registry().find(full);
    require(it != registry().end(), ErrorCode::invalid_argument, "unknown config key: " + full);
    it->second.set(cfg, value);
  }
  return cfg;
}

std::string write_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& [key, binder] : registry()) {
    const size_t dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + binder.get(cfg) + "\n";
  }
  return out;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::io, "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << write_config(cfg);
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

}  // namespace latmap
