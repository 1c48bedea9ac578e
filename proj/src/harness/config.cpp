#include "qtrack/harness/config.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace qtrack::harness {
namespace {

using nlohmann::json;

Eigen::Vector3d vec3_of(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("config: expected 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Vector3i vec3i_of(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("config: expected 3 ints");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

Eigen::VectorXd vecx_of(const json& j) {
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json to_array(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }
json to_array(const Eigen::Vector3i& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_array(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

std::vector<int> ints_of(const json& j) {
  std::vector<int> out;
  for (const auto& e : j) out.push_back(e.get<int>());
  return out;
}

std::string mode_name(mpc::ContractionMode m) {
  switch (m) {
    case mpc::ContractionMode::kHardLinearized: return "hard";
    case mpc::ContractionMode::kSoftPenalty: return "soft";
    case mpc::ContractionMode::kOff: return "off";
  }
  return "hard";
}

mpc::ContractionMode mode_from_name(const std::string& s) {
  if (s == "hard") return mpc::ContractionMode::kHardLinearized;
  if (s == "soft") return mpc::ContractionMode::kSoftPenalty;
  if (s == "off") return mpc::ContractionMode::kOff;
  throw std::invalid_argument("config: unknown contraction mode '" + s + "'");
}

}  // namespace

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::kNone: return "none";
    case Arm::kN1Ddpg: return "n1-ddpg";
    case Arm::kQuadue: return "quadue";
  }
  return "none";
}

Arm arm_from_name(const std::string& name) {
  if (name == "none") return Arm::kNone;
  if (name == "n1-ddpg") return Arm::kN1Ddpg;
  if (name == "quadue") return Arm::kQuadue;
  throw std::invalid_argument("config: unknown arm '" + name + "'");
}

kinojss::OccupancyGrid GridSpec::make() const {
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("config: cannot open grid file " + file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return kinojss::OccupancyGrid::from_json(text);
  }
  if (random) return kinojss::random_grid(random_cfg);
  return kinojss::OccupancyGrid(dims, resolution);
}

void RunConfig::validate() const {
  if (log_hz <= 0.0) throw std::invalid_argument("run: log_hz must be > 0");
  if (sim_substep <= 0.0) throw std::invalid_argument("run: sim_substep must be > 0");
  if (extra_time < 0.0) throw std::invalid_argument("run: extra_time must be >= 0");
  if (success_deviation <= 0.0) throw std::invalid_argument("run: success_deviation must be > 0");
  if (goal_reach_tol <= 0.0) throw std::invalid_argument("run: goal_reach_tol must be > 0");
  if (est_filter_alpha <= 0.0 || est_filter_alpha > 1.0) {
    throw std::invalid_argument("run: est_filter_alpha must be in (0, 1]");
  }
  if (est_quantum < 0.0) throw std::invalid_argument("run: est_quantum must be >= 0");
}

void ScenarioConfig::validate() const {
  model.validate();
  ccm.validate();
  mpc.validate();
  field.validate();
  jss.validate();
  agent.validate();
  trainer.validate();
  reward.validate();
  run.validate();
  if (episodes < 1) throw std::invalid_argument("config: episodes must be >= 1");
  if (eval_runs < 1) throw std::invalid_argument("config: eval_runs must be >= 1");
  if (train_force_min > train_force_max)
    throw std::invalid_argument("config: train_force range inverted");
  if (diag_window < 1) throw std::invalid_argument("config: diag_window must be >= 1");
}

ScenarioConfig config_from_json(const json& j) {
  ScenarioConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("arm")) c.arm = arm_from_name(j["arm"].get<std::string>());

  if (j.contains("model")) {
    const json& m = j["model"];
    c.model.mass = m.value("mass", c.model.mass);
    if (m.contains("inertia")) c.model.inertia = vec3_of(m["inertia"]);
    c.model.gravity = m.value("gravity", c.model.gravity);
    c.model.arm = m.value("arm", c.model.arm);
    c.model.torque_coeff = m.value("torque_coeff", c.model.torque_coeff);
    c.model.thrust_max = m.value("thrust_max", c.model.thrust_max);
  }

  if (j.contains("ccm")) {
    const json& m = j["ccm"];
    c.ccm.lambda = m.value("lambda", c.ccm.lambda);
    c.ccm.m_lower = m.value("m_lower", c.ccm.m_lower);
    c.ccm.m_upper = m.value("m_upper", c.ccm.m_upper);
    c.ccm.overshoot = m.value("overshoot", c.ccm.overshoot);
    c.ccm.fd_step = m.value("fd_step", c.ccm.fd_step);
    if (m.contains("metric_hidden")) c.metric_hidden = ints_of(m["metric_hidden"]);
    if (m.contains("gain_hidden")) c.gain_hidden = ints_of(m["gain_hidden"]);
    c.gain_scale = m.value("gain_scale", c.gain_scale);
    c.phase1_gate = m.value("phase1_gate", c.phase1_gate);
    if (m.contains("train")) {
      const json& t = m["train"];
      c.ccm_train.iterations = t.value("iterations", c.ccm_train.iterations);
      c.ccm_train.batch = t.value("batch", c.ccm_train.batch);
      c.ccm_train.lr = t.value("lr", c.ccm_train.lr);
      c.ccm_train.lr_final = t.value("lr_final", c.ccm_train.lr_final);
      c.ccm_train.w_lower = t.value("w_lower", c.ccm_train.w_lower);
      c.ccm_train.w_upper = t.value("w_upper", c.ccm_train.w_upper);
      c.ccm_train.w_residual = t.value("w_residual", c.ccm_train.w_residual);
      c.ccm_train.eps_margin = t.value("eps_margin", c.ccm_train.eps_margin);
      c.ccm_train.seed = t.value("seed", c.ccm_train.seed);
      c.ccm_train.log_every = t.value("log_every", c.ccm_train.log_every);
      c.ccm_train.nan_checkpoint_path =
          t.value("nan_checkpoint_path", c.ccm_train.nan_checkpoint_path);
    }
  }

  if (j.contains("mpc")) {
    const json& m = j["mpc"];
    c.mpc.ts = m.value("ts", c.mpc.ts);
    c.mpc.horizon = m.value("horizon", c.mpc.horizon);
    if (m.contains("h1_diag")) c.mpc.h1_diag = vecx_of(m["h1_diag"]);
    if (m.contains("h2_diag")) c.mpc.h2_diag = vecx_of(m["h2_diag"]);
    if (m.contains("mode")) c.mpc.mode = mode_from_name(m["mode"].get<std::string>());
    c.mpc.omega_ccm = m.value("omega_ccm", c.mpc.omega_ccm);
    c.mpc.slack_weight = m.value("slack_weight", c.mpc.slack_weight);
    if (m.contains("solver")) {
      const json& s = m["solver"];
      c.mpc.solver.rho = s.value("rho", c.mpc.solver.rho);
      c.mpc.solver.rho_eq_scale = s.value("rho_eq_scale", c.mpc.solver.rho_eq_scale);
      c.mpc.solver.sigma = s.value("sigma", c.mpc.solver.sigma);
      c.mpc.solver.alpha = s.value("alpha", c.mpc.solver.alpha);
      c.mpc.solver.tol = s.value("tol", c.mpc.solver.tol);
      c.mpc.solver.max_iter = s.value("max_iter", c.mpc.solver.max_iter);
      c.mpc.solver.check_every = s.value("check_every", c.mpc.solver.check_every);
      c.mpc.solver.polish = s.value("polish", c.mpc.solver.polish);
      c.mpc.solver.psd_tol = s.value("psd_tol", c.mpc.solver.psd_tol);
    }
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    c.grid.file = g.value("file", std::string());
    if (g.contains("random")) {
      const json& r = g["random"];
      c.grid.random = true;
      if (r.contains("dims")) c.grid.random_cfg.dims = vec3i_of(r["dims"]);
      c.grid.random_cfg.resolution = r.value("resolution", c.grid.random_cfg.resolution);
      c.grid.random_cfg.obstacle_count =
          r.value("obstacle_count", c.grid.random_cfg.obstacle_count);
      c.grid.random_cfg.seed = r.value("seed", c.grid.random_cfg.seed);
      c.grid.random_cfg.corridor_clearance =
          r.value("corridor_clearance", c.grid.random_cfg.corridor_clearance);
      c.grid.random_cfg.carve_corridor =
          r.value("carve_corridor", c.grid.random_cfg.carve_corridor);
      if (r.contains("start")) c.grid.random_cfg.start = vec3i_of(r["start"]);
      if (r.contains("goal")) c.grid.random_cfg.goal = vec3i_of(r["goal"]);
    }
    if (g.contains("dims")) c.grid.dims = vec3i_of(g["dims"]);
    c.grid.resolution = g.value("resolution", c.grid.resolution);
  }

  if (j.contains("start")) c.start = vec3_of(j["start"]);
  if (j.contains("goal")) c.goal = vec3_of(j["goal"]);

  if (j.contains("field")) {
    const json& f = j["field"];
    c.field.noise_std = f.value("noise_std", c.field.noise_std);
    c.field.estimator_std = f.value("estimator_std", c.field.estimator_std);
    c.field.estimator_bound = f.value("estimator_bound", c.field.estimator_bound);
    if (f.contains("zones")) {
      c.field.zones.clear();
      for (const auto& z : f["zones"]) {
        wind::ForceZone zone;
        zone.lo = vec3_of(z.at("lo"));
        zone.hi = vec3_of(z.at("hi"));
        zone.force = vec3_of(z.at("force"));
        zone.ramp = z.value("ramp", zone.ramp);
        c.field.zones.push_back(zone);
      }
    }
  }

  if (j.contains("jss")) {
    const json& s = j["jss"];
    c.jss.v_max = s.value("v_max", c.jss.v_max);
    c.jss.a_max = s.value("a_max", c.jss.a_max);
    c.jss.tau = s.value("tau", c.jss.tau);
    c.jss.goal_tol = s.value("goal_tol", c.jss.goal_tol);
    c.jss.noise_std = s.value("noise_std", c.jss.noise_std);
    c.jss.correction_sign = s.value("correction_sign", c.jss.correction_sign);
    c.jss.max_depth = s.value("max_depth", c.jss.max_depth);
    c.jss.max_expansions = s.value("max_expansions", c.jss.max_expansions);
    c.jss.v_quantum = s.value("v_quantum", c.jss.v_quantum);
    c.jss.jump = s.value("jump", c.jss.jump);
    c.jss.exhaustion_fallback = s.value("exhaustion_fallback", c.jss.exhaustion_fallback);
    c.jss.seed = s.value("seed", c.jss.seed);
  }

  if (j.contains("reference")) {
    const json& r = j["reference"];
    c.reference.dt = r.value("dt", c.reference.dt);
    c.reference.blend_time = r.value("blend_time", c.reference.blend_time);
    c.reference.brake_time_min = r.value("brake_time_min", c.reference.brake_time_min);
    c.reference.hover_hold = r.value("hover_hold", c.reference.hover_hold);
  }

  if (j.contains("agent")) {
    const json& a = j["agent"];
    c.agent.n_quantiles = a.value("n_quantiles", c.agent.n_quantiles);
    c.agent.gamma = a.value("gamma", c.agent.gamma);
    c.agent.lr_actor = a.value("lr_actor", c.agent.lr_actor);
    c.agent.lr_critic = a.value("lr_critic", c.agent.lr_critic);
    c.agent.polyak = a.value("polyak", c.agent.polyak);
    c.agent.a_max = a.value("a_max", c.agent.a_max);
    c.agent.kappa_h = a.value("kappa_h", c.agent.kappa_h);
    c.agent.noise_std = a.value("noise_std", c.agent.noise_std);
    c.agent.batch = a.value("batch", c.agent.batch);
    if (a.contains("actor_hidden")) c.agent.actor_hidden = ints_of(a["actor_hidden"]);
    if (a.contains("critic_hidden")) c.agent.critic_hidden = ints_of(a["critic_hidden"]);
    c.agent.seed = a.value("seed", c.agent.seed);
  }

  if (j.contains("trainer")) {
    const json& t = j["trainer"];
    c.trainer.buffer_capacity = t.value("buffer_capacity", c.trainer.buffer_capacity);
    c.trainer.warmup_transitions = t.value("warmup_transitions", c.trainer.warmup_transitions);
    c.trainer.train_every = t.value("train_every", c.trainer.train_every);
    c.trainer.epsilon_start = t.value("epsilon_start", c.trainer.epsilon_start);
    c.trainer.epsilon_end = t.value("epsilon_end", c.trainer.epsilon_end);
    c.trainer.epsilon_anneal_episodes =
        t.value("epsilon_anneal_episodes", c.trainer.epsilon_anneal_episodes);
    c.trainer.probe_every = t.value("probe_every", c.trainer.probe_every);
    c.trainer.probe_draws = t.value("probe_draws", c.trainer.probe_draws);
    c.trainer.probe_full_cap = t.value("probe_full_cap", c.trainer.probe_full_cap);
    c.trainer.nan_checkpoint_path =
        t.value("nan_checkpoint_path", c.trainer.nan_checkpoint_path);
  }

  if (j.contains("reward")) {
    const json& r = j["reward"];
    c.reward.w_c1 = r.value("w_c1", c.reward.w_c1);
    c.reward.w_c2 = r.value("w_c2", c.reward.w_c2);
    c.reward.w_c3 = r.value("w_c3", c.reward.w_c3);
    if (r.contains("h1_diag")) c.reward.h1_diag = vecx_of(r["h1_diag"]);
    if (r.contains("h2_diag")) c.reward.h2_diag = vecx_of(r["h2_diag"]);
    c.reward.eps_margin = r.value("eps_margin", c.reward.eps_margin);
  }

  c.episodes = j.value("episodes", c.episodes);
  c.eval_runs = j.value("eval_runs", c.eval_runs);
  if (j.contains("train_force")) {
    c.train_force_min = j["train_force"][0].get<double>();
    c.train_force_max = j["train_force"][1].get<double>();
  }
  c.diag_tau = j.value("diag_tau", c.diag_tau);
  c.diag_window = j.value("diag_window", c.diag_window);

  if (j.contains("run")) {
    const json& r = j["run"];
    c.run.log_hz = r.value("log_hz", c.run.log_hz);
    c.run.sim_substep = r.value("sim_substep", c.run.sim_substep);
    c.run.extra_time = r.value("extra_time", c.run.extra_time);
    c.run.success_deviation = r.value("success_deviation", c.run.success_deviation);
    c.run.goal_reach_tol = r.value("goal_reach_tol", c.run.goal_reach_tol);
    c.run.planner_knows_field = r.value("planner_knows_field", c.run.planner_knows_field);
    if (r.contains("start_offset")) c.run.start_offset = vec3_of(r["start_offset"]);
    c.run.est_filter_alpha = r.value("est_filter_alpha", c.run.est_filter_alpha);
    c.run.est_quantum = r.value("est_quantum", c.run.est_quantum);
  }

  c.validate();
  return c;
}

nlohmann::json config_to_json(const ScenarioConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["arm"] = arm_name(c.arm);
  j["model"] = {{"mass", c.model.mass},
                {"inertia", to_array(c.model.inertia)},
                {"gravity", c.model.gravity},
                {"arm", c.model.arm},
                {"torque_coeff", c.model.torque_coeff},
                {"thrust_max", c.model.thrust_max}};
  j["ccm"] = {{"lambda", c.ccm.lambda},
              {"m_lower", c.ccm.m_lower},
              {"m_upper", c.ccm.m_upper},
              {"overshoot", c.ccm.overshoot},
              {"fd_step", c.ccm.fd_step},
              {"metric_hidden", c.metric_hidden},
              {"gain_hidden", c.gain_hidden},
              {"gain_scale", c.gain_scale},
              {"phase1_gate", c.phase1_gate},
              {"train",
               {{"iterations", c.ccm_train.iterations},
                {"batch", c.ccm_train.batch},
                {"lr", c.ccm_train.lr},
                {"lr_final", c.ccm_train.lr_final},
                {"w_lower", c.ccm_train.w_lower},
                {"w_upper", c.ccm_train.w_upper},
                {"w_residual", c.ccm_train.w_residual},
                {"eps_margin", c.ccm_train.eps_margin},
                {"seed", c.ccm_train.seed},
                {"log_every", c.ccm_train.log_every},
                {"nan_checkpoint_path", c.ccm_train.nan_checkpoint_path}}}};
  j["mpc"] = {{"ts", c.mpc.ts},
              {"horizon", c.mpc.horizon},
              {"h1_diag", to_array(c.mpc.h1_diag)},
              {"h2_diag", to_array(c.mpc.h2_diag)},
              {"mode", mode_name(c.mpc.mode)},
              {"omega_ccm", c.mpc.omega_ccm},
              {"slack_weight", c.mpc.slack_weight},
              {"solver",
               {{"rho", c.mpc.solver.rho},
                {"rho_eq_scale", c.mpc.solver.rho_eq_scale},
                {"sigma", c.mpc.solver.sigma},
                {"alpha", c.mpc.solver.alpha},
                {"tol", c.mpc.solver.tol},
                {"max_iter", c.mpc.solver.max_iter},
                {"check_every", c.mpc.solver.check_every},
                {"polish", c.mpc.solver.polish},
                {"psd_tol", c.mpc.solver.psd_tol}}}};
  json grid;
  grid["file"] = c.grid.file;
  if (c.grid.random) {
    grid["random"] = {{"dims", to_array(c.grid.random_cfg.dims)},
                      {"resolution", c.grid.random_cfg.resolution},
                      {"obstacle_count", c.grid.random_cfg.obstacle_count},
                      {"seed", c.grid.random_cfg.seed},
                      {"corridor_clearance", c.grid.random_cfg.corridor_clearance},
                      {"carve_corridor", c.grid.random_cfg.carve_corridor},
                      {"start", to_array(c.grid.random_cfg.start)},
                      {"goal", to_array(c.grid.random_cfg.goal)}};
  }
  grid["dims"] = to_array(c.grid.dims);
  grid["resolution"] = c.grid.resolution;
  j["grid"] = grid;
  j["start"] = to_array(c.start);
  j["goal"] = to_array(c.goal);
  json zones = json::array();
  for (const auto& z : c.field.zones)
    zones.push_back({{"lo", to_array(z.lo)},
                     {"hi", to_array(z.hi)},
                     {"force", to_array(z.force)},
                     {"ramp", z.ramp}});
  j["field"] = {{"noise_std", c.field.noise_std},
                {"estimator_std", c.field.estimator_std},
                {"estimator_bound", c.field.estimator_bound},
                {"zones", zones}};
  j["jss"] = {{"v_max", c.jss.v_max},
              {"a_max", c.jss.a_max},
              {"tau", c.jss.tau},
              {"goal_tol", c.jss.goal_tol},
              {"noise_std", c.jss.noise_std},
              {"correction_sign", c.jss.correction_sign},
              {"max_depth", c.jss.max_depth},
              {"max_expansions", c.jss.max_expansions},
              {"v_quantum", c.jss.v_quantum},
              {"jump", c.jss.jump},
              {"exhaustion_fallback", c.jss.exhaustion_fallback},
              {"seed", c.jss.seed}};
  j["reference"] = {{"dt", c.reference.dt},
                    {"blend_time", c.reference.blend_time},
                    {"brake_time_min", c.reference.brake_time_min},
                    {"hover_hold", c.reference.hover_hold}};
  j["agent"] = {{"n_quantiles", c.agent.n_quantiles},
                {"gamma", c.agent.gamma},
                {"lr_actor", c.agent.lr_actor},
                {"lr_critic", c.agent.lr_critic},
                {"polyak", c.agent.polyak},
                {"a_max", c.agent.a_max},
                {"kappa_h", c.agent.kappa_h},
                {"noise_std", c.agent.noise_std},
                {"batch", c.agent.batch},
                {"actor_hidden", c.agent.actor_hidden},
                {"critic_hidden", c.agent.critic_hidden},
                {"seed", c.agent.seed}};
  j["trainer"] = {{"buffer_capacity", c.trainer.buffer_capacity},
                  {"warmup_transitions", c.trainer.warmup_transitions},
                  {"train_every", c.trainer.train_every},
                  {"epsilon_start", c.trainer.epsilon_start},
                  {"epsilon_end", c.trainer.epsilon_end},
                  {"epsilon_anneal_episodes", c.trainer.epsilon_anneal_episodes},
                  {"probe_every", c.trainer.probe_every},
                  {"probe_draws", c.trainer.probe_draws},
                  {"probe_full_cap", c.trainer.probe_full_cap},
                  {"nan_checkpoint_path", c.trainer.nan_checkpoint_path}};
  j["reward"] = {{"w_c1", c.reward.w_c1},
                 {"w_c2", c.reward.w_c2},
                 {"w_c3", c.reward.w_c3},
                 {"h1_diag", to_array(c.reward.h1_diag)},
                 {"h2_diag", to_array(c.reward.h2_diag)},
                 {"eps_margin", c.reward.eps_margin}};
  j["episodes"] = c.episodes;
  j["eval_runs"] = c.eval_runs;
  j["train_force"] = json::array({c.train_force_min, c.train_force_max});
  j["diag_tau"] = c.diag_tau;
  j["diag_window"] = c.diag_window;
  j["run"] = {{"log_hz", c.run.log_hz},
              {"sim_substep", c.run.sim_substep},
              {"extra_time", c.run.extra_time},
              {"success_deviation", c.run.success_deviation},
              {"goal_reach_tol", c.run.goal_reach_tol},
              {"planner_knows_field", c.run.planner_knows_field},
              {"start_offset", to_array(c.run.start_offset)},
              {"est_filter_alpha", c.run.est_filter_alpha},
              {"est_quantum", c.run.est_quantum}};
  return j;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

void save_config(const std::string& path, const ScenarioConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("config: cannot open " + path);
  out << config_to_json(cfg).dump(2) << '\n';
}

}  // namespace qtrack::harness
