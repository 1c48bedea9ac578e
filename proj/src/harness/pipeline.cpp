#include "qtrack/harness/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "qtrack/nn/checkpoint.hpp"

namespace qtrack::harness {
namespace {

using nlohmann::json;

Eigen::VectorXd hover_state() {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(13);
  x[6] = 1.0;
  return x;
}

void write_phase1_curve(const std::string& path, const ccm::MetricTrainReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("pipeline: cannot open " + path);
  out << "iteration,loss,lower_pen,upper_pen,residual_pen\n";
  for (const auto& row : report.curve)
    out << row.iteration << ',' << row.loss << ',' << row.lower_pen << ',' << row.upper_pen
        << ',' << row.residual_pen << '\n';
}

json report_to_json(const quadue::AccelerationReport& r) {
  return {{"kappa_hat", r.kappa_hat}, {"sigma_sq", r.sigma_sq},
          {"case1", r.case1},         {"threshold", r.threshold},
          {"running_average", r.running_average}, {"crossed", r.crossed},
          {"crossed_at_step", r.crossed_at_step}, {"tau", r.tau},
          {"window", r.window}};
}

quadue::AgentConfig agent_config_for(const ScenarioConfig& cfg) {
  quadue::AgentConfig a = cfg.agent;
  if (cfg.arm == Arm::kN1Ddpg) {
    a.n_quantiles = 1;
    a.kappa_h = 1e9;  // effectively squared-error regression
  }
  return a;
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void make_nominal_pair(const ScenarioConfig& cfg, const ccm::ControlAffineModel& ca,
                       ccm::MetricNet& metric, ccm::FeedbackGain& gain) {
  metric = ccm::MetricNet::make(cfg.ccm, ca, cfg.metric_hidden, cfg.seed);
  gain = ccm::FeedbackGain::make(ca, cfg.gain_hidden, cfg.gain_scale, cfg.seed + 1);

  const Eigen::VectorXd x0 = hover_state();
  const Eigen::VectorXd u0 = dyn::hover_input(cfg.model);
  const auto [a, b] = ca.jacobians(x0, u0);
  Eigen::VectorXd q_diag(13);
  q_diag << 10, 10, 10, 1, 1, 1, 1, 1, 1, 1, 0.1, 0.1, 0.1;
  const Eigen::VectorXd r_diag = Eigen::VectorXd::Ones(4);
  gain.base = ccm::lqr_gain(a, b, q_diag, r_diag, cfg.mpc.ts);
}

TrainedArtifacts train_pipeline(const ScenarioConfig& cfg, const std::string& out_dir,
                                std::ostream* log) {
  TrainedArtifacts art;
  const ccm::ControlAffineModel ca = ccm::quadrotor_model(cfg.model);
  art.metric = std::make_shared<ccm::MetricNet>();
  art.gain = std::make_shared<ccm::FeedbackGain>();
  make_nominal_pair(cfg, ca, *art.metric, *art.gain);

  if (log) *log << "phase 1: training nominal metric and gain\n";
  const ccm::SampleFn sampler = ccm::hover_tube_sampler(cfg.model);
  art.phase1 = ccm::train_nominal_metric(*art.metric, *art.gain, ca, sampler, cfg.ccm_train);
  if (log)
    *log << "phase 1: violation fraction " << art.phase1.violation_fraction << " (gate "
         << cfg.phase1_gate << ")\n";

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_phase1_curve(out_dir + "/phase1_curve.csv", art.phase1);
  }

  if (art.phase1.aborted || art.phase1.violation_fraction > cfg.phase1_gate) {
    art.phase2_block_reason = art.phase1.aborted
                                  ? "phase 1 diverged"
                                  : "phase 1 violation fraction above gate";
    if (!out_dir.empty()) save_artifacts(out_dir, art, cfg);
    return art;
  }

  if (cfg.arm == Arm::kNone) {
    art.phase2_block_reason = "arm has no estimator";
    if (!out_dir.empty()) save_artifacts(out_dir, art, cfg);
    return art;
  }

  if (log) *log << "phase 2: planning the training reference\n";
  const PlannedScenario planned = plan_reference(cfg);

  quadue::RlStateCodec codec;
  quadue::TrainerConfig trainer_cfg = cfg.trainer;
  if (!out_dir.empty() && trainer_cfg.nan_checkpoint_path.empty())
    trainer_cfg.nan_checkpoint_path = out_dir + "/agent_nan.ck";
  quadue::QuadueTrainer trainer(agent_config_for(cfg), trainer_cfg, codec.dim(),
                                codec.state_dim, codec.input_dim);

  ArmModels models;
  models.metric = art.metric;
  models.gain = art.gain;
  // Non-owning view; the trainer outlives every run in this loop.
  models.agent = std::shared_ptr<const quadue::UncertaintyAgent>(
      std::shared_ptr<const quadue::UncertaintyAgent>(), &trainer.agent());

  std::mt19937_64 episode_rng(cfg.seed ^ 0x5deece66dULL);
  std::uniform_real_distribution<double> force(cfg.train_force_min, cfg.train_force_max);

  for (int e = 0; e < cfg.episodes; ++e) {
    wind::DisturbanceField field = cfg.field;
    for (auto& zone : field.zones) zone.force = {force(episode_rng), force(episode_rng), 0.0};

    EpisodeHooks hooks;
    hooks.act = [&](const Eigen::VectorXd& s) { return trainer.select_action(s, e); };
    hooks.observe = [&](const quadue::Transition& t) { trainer.observe(t); };

    const RunMetrics rm = run_closed_loop(cfg, models, planned.trajectory, field,
                                          cfg.seed * 1000 + static_cast<std::uint64_t>(e),
                                          &hooks);
    trainer.end_episode(e, rm.episode_return);
    if (log && (e % 10 == 0 || e + 1 == cfg.episodes))
      *log << "phase 2: episode " << e << " return " << rm.episode_return << " updates "
           << trainer.updates() << "\n";
    if (trainer.aborted()) {
      art.phase2_block_reason = "phase 2 diverged";
      break;
    }
  }

  art.curves = trainer.curves();
  art.agent = std::make_shared<quadue::UncertaintyAgent>(trainer.agent());
  art.phase2_ran = !trainer.aborted();

  const int steps = static_cast<int>(trainer.record().steps());
  if (steps > 0)
    art.accel = quadue::acceleration_diagnostics(trainer.record(), cfg.diag_tau,
                                                 std::min(cfg.diag_window, steps));

  if (!out_dir.empty()) {
    quadue::write_curves_csv(out_dir + "/curves.csv", art.curves);
    std::ofstream diag(out_dir + "/diagnostics.json");
    diag << report_to_json(art.accel).dump(2) << '\n';
    save_artifacts(out_dir, art, cfg);
  }
  return art;
}

void save_artifacts(const std::string& dir, const TrainedArtifacts& art,
                    const ScenarioConfig& cfg) {
  std::filesystem::create_directories(dir);

  nn::Checkpoint ccm_ck;
  ccm_ck.nets["metric"] = {art.metric->spec, art.metric->theta};
  ccm_ck.nets["gain"] = {art.gain->spec, art.gain->theta};
  json meta;
  json base = json::array();
  for (Eigen::Index i = 0; i < art.gain->base.size(); ++i) base.push_back(art.gain->base(i));
  meta["gain_base"] = base;
  meta["violation_fraction"] = art.phase1.violation_fraction;
  meta["lambda"] = cfg.ccm.lambda;
  ccm_ck.metadata_json = meta.dump();
  nn::save_checkpoint(dir + "/ccm.ck", ccm_ck);

  if (art.agent) {
    nn::Checkpoint agent_ck;
    agent_ck.nets["actor"] = {art.agent->actor_spec(), art.agent->actor_theta()};
    agent_ck.nets["critic"] = {art.agent->critic_spec(), art.agent->critic_theta()};
    agent_ck.nets["actor_target"] = {art.agent->actor_spec(), art.agent->actor_target_theta()};
    agent_ck.nets["critic_target"] = {art.agent->critic_spec(),
                                      art.agent->critic_target_theta()};
    agent_ck.metadata_json = json{{"arm", arm_name(cfg.arm)}}.dump();
    nn::save_checkpoint(dir + "/agent.ck", agent_ck);
  }
  save_config(dir + "/config.json", cfg);
}

TrainedArtifacts load_artifacts(const std::string& dir, const ScenarioConfig& cfg) {
  TrainedArtifacts art;
  const ccm::ControlAffineModel ca = ccm::quadrotor_model(cfg.model);
  art.metric = std::make_shared<ccm::MetricNet>();
  art.gain = std::make_shared<ccm::FeedbackGain>();
  make_nominal_pair(cfg, ca, *art.metric, *art.gain);

  const nn::Checkpoint ccm_ck = nn::load_checkpoint(dir + "/ccm.ck");
  const auto& metric_snap = ccm_ck.nets.at("metric");
  const auto& gain_snap = ccm_ck.nets.at("gain");
  if (metric_snap.theta.size() != art.metric->theta.size() ||
      gain_snap.theta.size() != art.gain->theta.size())
    throw std::runtime_error("pipeline: checkpoint does not match the configured networks");
  art.metric->theta = metric_snap.theta;
  art.gain->theta = gain_snap.theta;
  const json meta = json::parse(ccm_ck.metadata_json);
  if (meta.contains("gain_base")) {
    const auto& base = meta["gain_base"];
    if (static_cast<Eigen::Index>(base.size()) != art.gain->base.size())
      throw std::runtime_error("pipeline: gain base size mismatch");
    for (Eigen::Index i = 0; i < art.gain->base.size(); ++i)
      art.gain->base(i) = base[static_cast<size_t>(i)].get<double>();
  }
  art.phase1.violation_fraction = meta.value("violation_fraction", 1.0);

  if (cfg.arm != Arm::kNone && std::filesystem::exists(dir + "/agent.ck")) {
    quadue::RlStateCodec codec;
    auto agent = std::make_shared<quadue::UncertaintyAgent>(agent_config_for(cfg), codec.dim(),
                                                            codec.state_dim, codec.input_dim);
    const nn::Checkpoint agent_ck = nn::load_checkpoint(dir + "/agent.ck");
    const auto& actor = agent_ck.nets.at("actor");
    const auto& critic = agent_ck.nets.at("critic");
    if (actor.theta.size() != agent->actor_theta().size() ||
        critic.theta.size() != agent->critic_theta().size())
      throw std::runtime_error("pipeline: agent checkpoint does not match the configuration");
    agent->actor_theta() = actor.theta;
    agent->critic_theta() = critic.theta;
    if (agent_ck.nets.count("actor_target"))
      agent->actor_target_theta() = agent_ck.nets.at("actor_target").theta;
    else
      agent->sync_targets();
    if (agent_ck.nets.count("critic_target"))
      agent->critic_target_theta() = agent_ck.nets.at("critic_target").theta;
    art.agent = agent;
    art.phase2_ran = true;
  }
  return art;
}

ArmSummary summarize_arm(const std::string& arm, const std::vector<RunMetrics>& runs) {
  ArmSummary s;
  s.arm = arm;
  s.runs = static_cast<int>(runs.size());
  if (runs.empty()) return s;
  std::vector<double> errors, lambdas, r2s;
  double time_sum = 0.0;
  int completed = 0;
  int successes = 0;
  for (const RunMetrics& r : runs) {
    errors.push_back(r.accumulated_error);
    if (r.success) ++successes;
    if (r.completed) {
      ++completed;
      time_sum += r.completion_time;
    }
    if (r.fit_post.valid) {
      lambdas.push_back(r.fit_post.lambda);
      r2s.push_back(r.fit_post.r2);
    }
  }
  s.success_rate = static_cast<double>(successes) / static_cast<double>(runs.size());
  s.mean_time = completed > 0 ? time_sum / completed : 0.0;
  s.median_error = median(errors);
  double err_sum = 0.0;
  for (double e : errors) err_sum += e;
  s.mean_error = err_sum / static_cast<double>(errors.size());
  s.median_lambda = median(lambdas);
  s.median_r2 = median(r2s);
  return s;
}

void compare_report(const std::vector<ArmSummary>& arms, const std::string& csv_path,
                    const std::string& md_path) {
  if (arms.empty()) throw std::invalid_argument("report: no arms");
  const double base_err = arms.front().median_error;

  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("report: cannot open " + csv_path);
  csv << "arm,runs,success_rate,mean_time_s,median_error_m,mean_error_m,median_lambda,"
         "median_r2,improvement_pct\n";
  for (const ArmSummary& a : arms) {
    const double imp =
        base_err > 0.0 ? 100.0 * (base_err - a.median_error) / base_err : 0.0;
    csv << a.arm << ',' << a.runs << ',' << a.success_rate << ',' << a.mean_time << ','
        << a.median_error << ',' << a.mean_error << ',' << a.median_lambda << ','
        << a.median_r2 << ',' << imp << '\n';
  }

  std::ofstream md(md_path);
  if (!md) throw std::runtime_error("report: cannot open " + md_path);
  md << "# Tracking comparison\n\n";
  md << "Success means the route completed with maximum deviation below 2.0 m.\n";
  md << "Improvement is measured on median accumulated error against the `" << arms.front().arm
     << "` arm.\n\n";
  md << "| arm | runs | success | time (s) | median err (m) | mean err (m) | lambda | R2 | "
        "improvement |\n";
  md << "|---|---|---|---|---|---|---|---|---|\n";
  for (const ArmSummary& a : arms) {
    const double imp =
        base_err > 0.0 ? 100.0 * (base_err - a.median_error) / base_err : 0.0;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f%%", imp);
    md << "| " << a.arm << " | " << a.runs << " | " << a.success_rate << " | " << a.mean_time
       << " | " << a.median_error << " | " << a.mean_error << " | " << a.median_lambda << " | "
       << a.median_r2 << " | " << buf << " |\n";
  }
}

}  // namespace qtrack::harness
