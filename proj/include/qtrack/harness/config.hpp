#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qtrack/ccm/metric_net.hpp"
#include "qtrack/ccm/train.hpp"
#include "qtrack/dyn/quad_model.hpp"
#include "qtrack/kinojss/grid.hpp"
#include "qtrack/kinojss/reference.hpp"
#include "qtrack/kinojss/search.hpp"
#include "qtrack/mpc/tracking_mpc.hpp"
#include "qtrack/quadue/agent.hpp"
#include "qtrack/quadue/reward.hpp"
#include "qtrack/quadue/train.hpp"
#include "qtrack/wind/disturbance_field.hpp"

namespace qtrack::harness {

enum class Arm { kNone, kN1Ddpg, kQuadue };

std::string arm_name(Arm arm);
Arm arm_from_name(const std::string& name);

// Where the occupancy grid comes from: a JSON file, a seeded random field,
// or an empty box of the given dimensions.
struct GridSpec {
  std::string file;
  bool random = false;
  kinojss::RandomGridConfig random_cfg;
  Eigen::Vector3i dims{20, 20, 5};
  double resolution = 0.2;

  kinojss::OccupancyGrid make() const;
};

struct RunConfig {
  double log_hz = 16.0;
  double sim_substep = 0.01;
  double extra_time = 0.0;          // simulated tail beyond the reference end
  double success_deviation = 2.0;   // max deviation allowed for success
  double goal_reach_tol = 0.5;      // completion radius around the final point
  bool planner_knows_field = false;
  Eigen::Vector3d start_offset = Eigen::Vector3d::Zero();  // initial position error
  double est_filter_alpha = 0.3;    // EMA gain on the force estimate fed forward
  double est_quantum = 0.5;         // feedforward snaps to this grid; 0 disables

  void validate() const;
};

// Everything one run or training job needs, in one schema. Every field has
// a default so partial JSON files stay valid.
struct ScenarioConfig {
  std::uint64_t seed = 1;
  Arm arm = Arm::kNone;

  dyn::ModelParams model;
  ccm::CcmConfig ccm;
  std::vector<int> metric_hidden{64, 64};
  std::vector<int> gain_hidden{64, 64};
  double gain_scale = 4.0;
  ccm::MetricTrainConfig ccm_train;
  double phase1_gate = 0.05;  // violation fraction that blocks phase 2

  mpc::MpcConfig mpc;
  GridSpec grid;
  Eigen::Vector3d start{0.5, 0.5, 0.5};
  Eigen::Vector3d goal{3.5, 3.5, 0.5};
  wind::DisturbanceField field;
  kinojss::JssConfig jss;
  kinojss::ReferenceConfig reference;

  quadue::AgentConfig agent;
  quadue::TrainerConfig trainer;
  quadue::RewardWeights reward;
  int episodes = 1000;
  int eval_runs = 10;
  double train_force_min = -3.0;  // per-episode horizontal force range
  double train_force_max = 3.0;
  double diag_tau = 0.5;
  int diag_window = 20;

  RunConfig run;

  void validate() const;
};

ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_config(const std::string& path);
void save_config(const std::string& path, const ScenarioConfig& cfg);

}  // namespace qtrack::harness
