#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qtrack/ccm/metric_net.hpp"
#include "qtrack/dyn/reference.hpp"
#include "qtrack/harness/config.hpp"
#include "qtrack/kinojss/grid.hpp"
#include "qtrack/kinojss/search.hpp"
#include "qtrack/quadue/agent.hpp"
#include "qtrack/quadue/replay.hpp"

namespace qtrack::harness {

// Exponential envelope c * exp(-lambda * t) fitted to an error trace by
// log-linear least squares over the window from the peak down to 5% of it.
struct FitResult {
  double c = 0.0;
  double lambda = 0.0;
  double r2 = 0.0;
  bool valid = false;
  double t_start = 0.0;
  double t_end = 0.0;
};

FitResult fit_contraction_rate(const std::vector<double>& t, const std::vector<double>& err);

struct LogRow {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd x_ref;
  Eigen::Vector4d u = Eigen::Vector4d::Zero();
  double slack = 0.0;
  double chat_lmax = 0.0;
  int iters = 0;
  double err = 0.0;  // position deviation magnitude
  Eigen::Vector3d ff = Eigen::Vector3d::Zero();  // force offset given to the controller
};

struct RunMetrics {
  bool success = false;
  bool completed = false;
  std::string reason;
  double completion_time = 0.0;
  double accumulated_error = 0.0;  // integral of position deviation
  double max_deviation = 0.0;
  FitResult fit;       // over the whole run
  FitResult fit_post;  // after the vehicle last leaves zone influence
  int control_steps = 0;
  int fallback_steps = 0;
  double episode_return = 0.0;  // populated when hooks report rewards
  std::vector<LogRow> log;
};

// Trained artifacts a run executes with. The metric and gain are always
// required; the agent only for the estimator arms.
struct ArmModels {
  std::shared_ptr<const ccm::MetricNet> metric;
  std::shared_ptr<const ccm::FeedbackGain> gain;
  std::shared_ptr<const quadue::UncertaintyAgent> agent;
};

// Optional per-step callbacks that let a trainer drive the correction
// action and harvest transitions from the closed loop.
struct EpisodeHooks {
  std::function<Eigen::VectorXd(const Eigen::VectorXd& s)> act;
  std::function<void(const quadue::Transition& t)> observe;
};

struct PlannedScenario {
  kinojss::OccupancyGrid grid;
  kinojss::Route route;
  dyn::ReferenceTrajectory trajectory;
};

// Plans the route on the configured grid and lifts it to a reference.
// Throws when the planner reports failure.
PlannedScenario plan_reference(const ScenarioConfig& cfg);

// One closed-loop tracking run of the reference under the given disturbance
// field. Deterministic in (cfg, models, seed).
RunMetrics run_closed_loop(const ScenarioConfig& cfg, const ArmModels& models,
                           const dyn::ReferenceTrajectory& trajectory,
                           const wind::DisturbanceField& field, std::uint64_t seed,
                           const EpisodeHooks* hooks = nullptr);

// plan_reference + run_closed_loop with the config's own field and seed.
RunMetrics run_scenario(const ScenarioConfig& cfg, const ArmModels& models);

void write_run_csv(const std::string& path, const RunMetrics& metrics);

}  // namespace qtrack::harness
