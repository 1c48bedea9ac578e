#include "qtrack/harness/runner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "qtrack/ccm/residual.hpp"
#include "qtrack/kinojss/reference.hpp"
#include "qtrack/mpc/tracking_mpc.hpp"
#include "qtrack/quadue/reward.hpp"
#include "qtrack/wind/disturbance_field.hpp"

namespace qtrack::harness {

FitResult fit_contraction_rate(const std::vector<double>& t, const std::vector<double>& err) {
  FitResult fit;
  if (t.size() != err.size() || t.size() < 5) return fit;
  size_t ip = 0;
  for (size_t i = 1; i < err.size(); ++i)
    if (err[i] > err[ip]) ip = i;
  const double peak = err[ip];
  if (!(peak > 1e-12)) return fit;

  size_t ie = err.size() - 1;
  const double target = 0.05 * peak;
  size_t imin = ip;
  for (size_t i = ip; i < err.size(); ++i) {
    if (err[i] < err[imin]) imin = i;
    if (err[i] <= target) {
      ie = i;
      break;
    }
    // A clear rebound ends the decay phase; fit up to the trough.
    if (err[i] > 2.0 * err[imin] && err[imin] < 0.5 * peak) {
      ie = imin;
      break;
    }
  }
  const size_t n = ie - ip + 1;
  if (n < 5) return fit;

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (size_t i = ip; i <= ie; ++i) {
    const double xi = t[i] - t[ip];
    const double yi = std::log(std::max(err[i], 1e-12));
    sx += xi;
    sy += yi;
    sxx += xi * xi;
    sxy += xi * yi;
  }
  const double nn = static_cast<double>(n);
  const double denom = nn * sxx - sx * sx;
  if (std::abs(denom) < 1e-12) return fit;
  const double slope = (nn * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / nn;

  double ss_res = 0.0, ss_tot = 0.0;
  const double ybar = sy / nn;
  for (size_t i = ip; i <= ie; ++i) {
    const double xi = t[i] - t[ip];
    const double yi = std::log(std::max(err[i], 1e-12));
    const double fi = intercept + slope * xi;
    ss_res += (yi - fi) * (yi - fi);
    ss_tot += (yi - ybar) * (yi - ybar);
  }
  fit.c = std::exp(intercept);
  fit.lambda = -slope;
  fit.r2 = ss_tot > 1e-18 ? 1.0 - ss_res / ss_tot : (ss_res < 1e-18 ? 1.0 : 0.0);
  fit.valid = true;
  fit.t_start = t[ip];
  fit.t_end = t[ie];
  return fit;
}

PlannedScenario plan_reference(const ScenarioConfig& cfg) {
  PlannedScenario out;
  out.grid = cfg.grid.make();
  Eigen::Vector3d e_f = Eigen::Vector3d::Zero();
  if (cfg.run.planner_knows_field)
    e_f = cfg.field.zone_sum_at(0.5 * (cfg.start + cfg.goal));
  out.route = kinojss::plan(out.grid, cfg.start, cfg.goal, e_f, cfg.jss);
  if (!out.route.success)
    throw std::runtime_error("runner: planner failed: " + out.route.reason);
  out.trajectory = kinojss::route_to_reference(out.route, cfg.reference, cfg.model);
  return out;
}

RunMetrics run_closed_loop(const ScenarioConfig& cfg, const ArmModels& models,
                           const dyn::ReferenceTrajectory& trajectory,
                           const wind::DisturbanceField& field, std::uint64_t seed,
                           const EpisodeHooks* hooks) {
  if (!models.metric || !models.gain)
    throw std::invalid_argument("runner: metric and gain models are required");
  const bool corrected = cfg.arm != Arm::kNone;
  if (corrected && !models.agent && !(hooks && hooks->act))
    throw std::invalid_argument("runner: estimator arm needs an agent or an act hook");
  if (trajectory.points.empty()) throw std::invalid_argument("runner: empty reference");

  const ccm::ControlAffineModel ca_model = ccm::quadrotor_model(cfg.model);
  mpc::TrackingMpc controller(cfg.mpc, cfg.model);
  controller.set_fallback_gain(models.gain);
  quadue::RlStateCodec codec;
  wind::DisturbanceEstimator estimator(field, seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 sim_rng(seed * 0x2545f4914f6cdd1dULL + 0x1234567ULL);

  const double ts = cfg.mpc.ts;
  const int n_sub = std::max(1, static_cast<int>(std::lround(ts / cfg.run.sim_substep)));
  const double h = ts / n_sub;
  const double t_end =
      trajectory.dt * static_cast<double>(trajectory.points.size() - 1) + cfg.run.extra_time;
  const double log_period = 1.0 / cfg.run.log_hz;
  const Eigen::Vector3d p_goal = trajectory.points.back().x.head<3>();

  RunMetrics metrics;
  Eigen::VectorXd x = trajectory.points.front().x;
  x.head<3>() += cfg.run.start_offset;
  Eigen::Vector4d u_prev = trajectory.points.front().u;
  Eigen::Vector3d ff_accel = Eigen::Vector3d::Zero();
  Eigen::Vector3d ff_held = Eigen::Vector3d::Zero();
  double t = 0.0;
  double next_log = 0.0;
  bool reached = false;

  while (t < t_end - 1e-9) {
    const auto window = trajectory.window(t, cfg.mpc.horizon + 1);
    const Eigen::VectorXd& x_ref = window[0].x;
    const double err = (x.head<3>() - x_ref.head<3>()).norm();
    metrics.max_deviation = std::max(metrics.max_deviation, err);

    if (!x.allFinite()) {
      metrics.reason = "state diverged";
      break;
    }
    if (!reached && (x.head<3>() - p_goal).norm() <= cfg.run.goal_reach_tol) {
      reached = true;
      metrics.completion_time = t;
    }

    const wind::WindEstimate est = estimator.estimate(x.head<3>(), t);
    const Eigen::MatrixXd m_now = models.metric->metric(x);
    const Eigen::MatrixXd cbar =
        ccm::contraction_residual(*models.metric, *models.gain, ca_model, x, x_ref, window[0].u)
            .value;

    Eigen::MatrixXd chat = cbar;
    Eigen::VectorXd s, a;
    if (corrected || (hooks && hooks->observe))
      s = codec.encode(x, x_ref, window[0].u, est.n_f, m_now);
    if (corrected) {
      a = (hooks && hooks->act) ? hooks->act(s) : models.agent->act(s);
      Eigen::MatrixXd mu1;
      std::vector<Eigen::MatrixXd> mu2;
      const quadue::UncertaintyAgent* splitter = models.agent.get();
      if (splitter != nullptr) {
        splitter->action_to_matrices(a, &mu1, &mu2);
      } else {
        const int n = codec.state_dim;
        mu1 = ccm::unvech_symmetric(a.head(ccm::vech_size(n)), n);
        mu2.resize(static_cast<size_t>(codec.input_dim));
        for (int jch = 0; jch < codec.input_dim; ++jch)
          mu2[static_cast<size_t>(jch)] = ccm::unvech_symmetric(
              a.segment((1 + jch) * ccm::vech_size(n), ccm::vech_size(n)), n);
      }
      chat = quadue::chat_estimate(cbar, mu1, mu2, u_prev);
      const double alpha = cfg.run.est_filter_alpha;
      const double q = cfg.run.est_quantum;
      if (q > 0.0 && (est.n_f - ff_accel).norm() > 1.5 * q) {
        ff_accel = est.n_f;
      } else {
        ff_accel = (1.0 - alpha) * ff_accel + alpha * est.n_f;
      }
      ff_held = ff_accel;
      if (q > 0.0) ff_held = (ff_held / q).array().round() * q;
      controller.set_disturbance(ff_held);
    }

    const mpc::MpcStepInfo info = controller.control_step(x, window, chat, m_now);
    ++metrics.control_steps;
    if (info.fallback) ++metrics.fallback_steps;

    if (t + 1e-9 >= next_log) {
      LogRow row;
      row.t = t;
      row.x = x;
      row.x_ref = x_ref;
      row.u = info.u;
      row.slack = info.slack_max;
      row.chat_lmax = info.chat_lmax;
      row.iters = info.iterations;
      row.err = err;
      row.ff = ff_held;
      metrics.log.push_back(row);
      next_log += log_period;
    }

    double t_sub = t;
    for (int i = 0; i < n_sub; ++i) {
      dyn::Disturbance d;
      d.accel = wind::true_force(field, x.head<3>(), t_sub, sim_rng);
      x = dyn::rk4_step(x, info.u, d, h, cfg.model);
      t_sub += h;
      metrics.accumulated_error += h * (x.head<3>() - trajectory.position_at(t_sub)).norm();
    }

    if (hooks && hooks->observe) {
      const dyn::ReferencePoint& rp_next = trajectory.at_time(t + ts);
      const double r =
          quadue::reward(*models.metric, chat, x, rp_next.x, info.u, cfg.reward).total;
      quadue::Transition tr;
      tr.s = s;
      tr.a = corrected
                 ? a
                 : Eigen::VectorXd::Zero((1 + codec.input_dim) *
                                         ccm::vech_size(codec.state_dim));
      tr.r = r;
      tr.s_next =
          codec.encode(x, rp_next.x, rp_next.u, est.n_f, models.metric->metric(x));
      tr.done = t + ts >= t_end - 1e-9;
      hooks->observe(tr);
      metrics.episode_return += r;
    }

    u_prev = info.u;
    t += ts;
  }

  const bool finite = x.allFinite();
  const bool at_goal = finite && (x.head<3>() - p_goal).norm() <= cfg.run.goal_reach_tol;
  metrics.completed = at_goal;
  if (!reached && at_goal) metrics.completion_time = t;
  if (!at_goal && metrics.reason.empty()) metrics.reason = "goal not reached";
  metrics.success =
      metrics.completed && metrics.max_deviation < cfg.run.success_deviation && finite;
  if (metrics.success) metrics.reason.clear();
  if (!metrics.success && metrics.reason.empty()) metrics.reason = "deviation bound exceeded";

  std::vector<double> ts_log, err_log;
  ts_log.reserve(metrics.log.size());
  err_log.reserve(metrics.log.size());
  for (const LogRow& row : metrics.log) {
    ts_log.push_back(row.t);
    err_log.push_back(row.err);
  }
  metrics.fit = fit_contraction_rate(ts_log, err_log);

  metrics.fit_post = metrics.fit;
  if (!field.zones.empty()) {
    // Decay of the last zone-induced deflection: the window opens where the
    // final in-zone stretch begins, so its peak is the zone deflection.
    std::vector<bool> in_zone(metrics.log.size());
    size_t last_in = metrics.log.size();
    for (size_t i = 0; i < metrics.log.size(); ++i) {
      in_zone[i] = field.zone_sum_at(metrics.log[i].x.head<3>()).norm() > 1e-9;
      if (in_zone[i]) last_in = i;
    }
    if (last_in < metrics.log.size()) {
      size_t seg_start = last_in;
      while (seg_start > 0 && in_zone[seg_start - 1]) --seg_start;
      const std::vector<double> ts_post(ts_log.begin() + static_cast<long>(seg_start),
                                        ts_log.end());
      const std::vector<double> err_post(err_log.begin() + static_cast<long>(seg_start),
                                         err_log.end());
      metrics.fit_post = fit_contraction_rate(ts_post, err_post);
    }
  }
  return metrics;
}

RunMetrics run_scenario(const ScenarioConfig& cfg, const ArmModels& models) {
  const PlannedScenario planned = plan_reference(cfg);
  return run_closed_loop(cfg, models, planned.trajectory, cfg.field, cfg.seed);
}

void write_run_csv(const std::string& path, const RunMetrics& metrics) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("runner: cannot open " + path);
  out << "t";
  for (int i = 0; i < 13; ++i) out << ",x" << i;
  for (int i = 0; i < 13; ++i) out << ",xref" << i;
  for (int i = 0; i < 4; ++i) out << ",u" << i;
  out << ",slack,chat_lmax,iters,err,ff0,ff1,ff2\n";
  out.precision(9);
  for (const LogRow& row : metrics.log) {
    out << row.t;
    for (int i = 0; i < 13; ++i) out << ',' << row.x[i];
    for (int i = 0; i < 13; ++i) out << ',' << row.x_ref[i];
    for (int i = 0; i < 4; ++i) out << ',' << row.u[i];
    out << ',' << row.slack << ',' << row.chat_lmax << ',' << row.iters << ',' << row.err;
    for (int i = 0; i < 3; ++i) out << ',' << row.ff[i];
    out << '\n';
  }
}

}  // namespace qtrack::harness
