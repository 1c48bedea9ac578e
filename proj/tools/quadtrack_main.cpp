#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qtrack/harness/config.hpp"
#include "qtrack/harness/pipeline.hpp"
#include "qtrack/harness/runner.hpp"
#include "qtrack/kinojss/grid.hpp"
#include "qtrack/quadue/diagnostics.hpp"

namespace {

using nlohmann::json;
using namespace qtrack;

harness::ScenarioConfig load_or_default(const std::string& path) {
  if (path.empty()) return harness::ScenarioConfig{};
  return harness::load_config(path);
}

json metrics_to_json(const harness::RunMetrics& m) {
  return {{"success", m.success},
          {"completed", m.completed},
          {"reason", m.reason},
          {"completion_time", m.completion_time},
          {"accumulated_error", m.accumulated_error},
          {"max_deviation", m.max_deviation},
          {"lambda", m.fit.lambda},
          {"r2", m.fit.r2},
          {"fit_valid", m.fit.valid},
          {"control_steps", m.control_steps},
          {"fallback_steps", m.fallback_steps}};
}

harness::RunMetrics metrics_from_json(const json& j) {
  harness::RunMetrics m;
  m.success = j.value("success", false);
  m.completed = j.value("completed", false);
  m.reason = j.value("reason", std::string());
  m.completion_time = j.value("completion_time", 0.0);
  m.accumulated_error = j.value("accumulated_error", 0.0);
  m.max_deviation = j.value("max_deviation", 0.0);
  m.fit.lambda = j.value("lambda", 0.0);
  m.fit.r2 = j.value("r2", 0.0);
  m.fit.valid = j.value("fit_valid", false);
  m.control_steps = j.value("control_steps", 0);
  m.fallback_steps = j.value("fallback_steps", 0);
  return m;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_train(const std::string& config, const std::string& out, std::uint64_t seed,
              const std::string& arm) {
  harness::ScenarioConfig cfg = load_or_default(config);
  if (seed != 0) cfg.seed = seed;
  if (!arm.empty()) cfg.arm = harness::arm_from_name(arm);
  const harness::TrainedArtifacts art = harness::train_pipeline(cfg, out, &std::cout);
  std::cout << "phase1 violation fraction: " << art.phase1.violation_fraction << "\n";
  if (!art.phase2_ran && !art.phase2_block_reason.empty())
    std::cout << "phase2 blocked: " << art.phase2_block_reason << "\n";
  if (art.phase2_ran)
    std::cout << "phase2 episodes: " << art.curves.size()
              << ", kappa_hat: " << art.accel.kappa_hat
              << ", case1: " << (art.accel.case1 ? "yes" : "no") << "\n";
  std::cout << "artifacts written to " << out << "\n";
  return art.phase1.aborted ? 1 : 0;
}

int cmd_run(const std::string& config, const std::string& ckpt, std::uint64_t seed,
            const std::string& arm, const std::string& out) {
  harness::ScenarioConfig cfg = load_or_default(config);
  if (seed != 0) cfg.seed = seed;
  if (!arm.empty()) cfg.arm = harness::arm_from_name(arm);
  const harness::TrainedArtifacts art = harness::load_artifacts(ckpt, cfg);
  if (cfg.arm != harness::Arm::kNone && !art.agent)
    throw std::runtime_error("run: checkpoint has no agent for arm " +
                             harness::arm_name(cfg.arm));
  const harness::RunMetrics m = harness::run_scenario(cfg, art.models());
  const json j = metrics_to_json(m);
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    harness::write_run_csv(out + "/run.csv", m);
    std::ofstream f(out + "/metrics.json");
    f << j.dump(2) << '\n';
  }
  return m.success ? 0 : 1;
}

int cmd_sweep(const std::string& config, const std::string& ckpt, const std::string& arms,
              int seeds, const std::string& out) {
  harness::ScenarioConfig cfg = load_or_default(config);
  const std::vector<std::string> arm_names = split_list(arms);
  std::vector<std::string> dirs = split_list(ckpt);
  if (arm_names.empty()) throw std::runtime_error("sweep: --arms is required");
  if (dirs.empty()) throw std::runtime_error("sweep: --ckpt is required");
  while (dirs.size() < arm_names.size()) dirs.push_back(dirs.front());
  std::filesystem::create_directories(out);

  std::vector<harness::ArmSummary> summaries;
  json runs_json = json::array();
  for (size_t i = 0; i < arm_names.size(); ++i) {
    harness::ScenarioConfig cfg_a = cfg;
    cfg_a.arm = harness::arm_from_name(arm_names[i]);
    const harness::TrainedArtifacts art = harness::load_artifacts(dirs[i], cfg_a);
    std::vector<harness::RunMetrics> runs;
    json arm_runs = json::array();
    for (int s = 0; s < seeds; ++s) {
      harness::ScenarioConfig cfg_s = cfg_a;
      cfg_s.seed = cfg.seed + static_cast<std::uint64_t>(s);
      const harness::RunMetrics m = harness::run_scenario(cfg_s, art.models());
      harness::write_run_csv(out + "/" + arm_names[i] + "_seed" + std::to_string(s) + ".csv", m);
      arm_runs.push_back(metrics_to_json(m));
      runs.push_back(m);
      std::cout << arm_names[i] << " seed " << cfg_s.seed << ": err " << m.accumulated_error
                << " success " << m.success << "\n";
    }
    summaries.push_back(harness::summarize_arm(arm_names[i], runs));
    runs_json.push_back({{"arm", arm_names[i]}, {"runs", arm_runs}});
  }
  harness::compare_report(summaries, out + "/metrics.csv", out + "/report.md");
  std::ofstream f(out + "/runs.json");
  f << runs_json.dump(2) << '\n';
  std::cout << "report written to " << out << "/report.md\n";
  return 0;
}

int cmd_report(const std::string& runs_path, const std::string& out) {
  std::ifstream in(runs_path);
  if (!in) throw std::runtime_error("report: cannot open " + runs_path);
  json runs_json;
  in >> runs_json;
  std::vector<harness::ArmSummary> summaries;
  for (const auto& arm : runs_json) {
    std::vector<harness::RunMetrics> runs;
    for (const auto& r : arm["runs"]) runs.push_back(metrics_from_json(r));
    summaries.push_back(harness::summarize_arm(arm["arm"].get<std::string>(), runs));
  }
  std::filesystem::create_directories(out);
  harness::compare_report(summaries, out + "/metrics.csv", out + "/report.md");
  std::cout << "report written to " << out << "/report.md\n";
  return 0;
}

int cmd_gridgen(int preset, const std::string& out, std::uint64_t seed) {
  kinojss::RandomGridConfig cfg;
  cfg.obstacle_count = preset;
  cfg.seed = seed;
  const kinojss::OccupancyGrid grid = kinojss::random_grid(cfg);
  std::ofstream f(out);
  if (!f) throw std::runtime_error("gridgen: cannot open " + out);
  f << grid.to_json() << '\n';
  std::cout << "grid with " << grid.occupied_count() << " occupied cells written to " << out
            << "\n";
  return 0;
}

int cmd_diag(double kappa, double sigma_sq, double tau, int steps, int window,
             std::uint64_t seed) {
  // Synthetic descent on a convex quadratic with injected gradient noise of
  // a known ratio, classified exactly like a real training record.
  quadue::DiagnosticsRecord record;
  record.sigma_sq_configured = sigma_sq;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const int dim = 16;
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(dim, 2.0);
  const double lr = 0.05;
  const double noise_scale = std::sqrt(kappa * sigma_sq / dim);
  for (int t = 0; t < steps; ++t) {
    Eigen::VectorXd noise(dim);
    for (int i = 0; i < dim; ++i) noise[i] = noise_scale * unit(rng);
    const Eigen::VectorXd g = theta + noise;
    record.push_step(g.squaredNorm());
    if (t % 10 == 0) {
      double mb = 0.0;
      for (int d = 0; d < 8; ++d) {
        Eigen::VectorXd n2(dim);
        for (int i = 0; i < dim; ++i) n2[i] = noise_scale * unit(rng);
        mb += n2.squaredNorm();
      }
      record.push_probe(mb / 8.0, sigma_sq);
    }
    theta -= lr * g;
  }
  const quadue::AccelerationReport rep =
      quadue::acceleration_diagnostics(record, tau, std::min<int>(window, steps));
  json j = {{"kappa_hat", rep.kappa_hat},   {"sigma_sq", rep.sigma_sq},
            {"case1", rep.case1},           {"threshold", rep.threshold},
            {"running_average", rep.running_average},
            {"crossed", rep.crossed},       {"crossed_at_step", rep.crossed_at_step},
            {"tau", rep.tau},               {"window", rep.window}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contraction-metric tracking stack: training, runs, and reports"};
  app.require_subcommand(1);

  std::string config, out = "out", ckpt, arm, arms = "none,quadue", runs_path;
  std::uint64_t seed = 0;
  int sweep_seeds = 10;
  int preset = 149;
  double diag_kappa = 1.0, diag_sigma = 1.0, diag_tau = 0.5;
  int diag_steps = 2000, diag_window = 50;

  CLI::App* train = app.add_subcommand("train", "Run the two-phase training pipeline");
  train->add_option("--config", config, "Scenario config JSON");
  train->add_option("--out", out, "Artifact directory");
  train->add_option("--seed", seed, "Seed override (0 keeps the config's)");
  train->add_option("--arm", arm, "Arm override: none | n1-ddpg | quadue");

  CLI::App* run = app.add_subcommand("run", "Execute one closed-loop scenario");
  run->add_option("--config", config, "Scenario config JSON");
  run->add_option("--ckpt", ckpt, "Artifact directory from train")->required();
  run->add_option("--seed", seed, "Seed override (0 keeps the config's)");
  run->add_option("--arm", arm, "Arm override");
  run->add_option("--out", out, "Output directory for logs");

  CLI::App* sweep = app.add_subcommand("sweep", "Evaluate arms over seeds and compare");
  sweep->add_option("--config", config, "Scenario config JSON");
  sweep->add_option("--ckpt", ckpt, "Artifact dir, or comma list matching --arms")->required();
  sweep->add_option("--arms", arms, "Comma-separated arm list");
  sweep->add_option("--seeds", sweep_seeds, "Evaluation runs per arm");
  sweep->add_option("--out", out, "Output directory");

  CLI::App* report = app.add_subcommand("report", "Rebuild the comparison report");
  report->add_option("--runs", runs_path, "runs.json from sweep")->required();
  report->add_option("--out", out, "Output directory");

  CLI::App* gridgen = app.add_subcommand("gridgen", "Generate a random occupancy grid");
  gridgen->add_option("--preset", preset, "Obstacle count (499 | 249 | 149)");
  gridgen->add_option("--out", out, "Output grid JSON path");
  gridgen->add_option("--seed", seed, "Grid seed");

  CLI::App* diag = app.add_subcommand("diag", "Gradient-noise classification self-check");
  diag->add_option("--kappa", diag_kappa, "Injected gradient-noise ratio");
  diag->add_option("--sigma-sq", diag_sigma, "Base noise level");
  diag->add_option("--tau", diag_tau, "Stationarity threshold");
  diag->add_option("--steps", diag_steps, "Synthetic training steps");
  diag->add_option("--window", diag_window, "Running-average window");
  diag->add_option("--seed", seed, "RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config, out, seed, arm);
    if (run->parsed()) return cmd_run(config, ckpt, seed, arm, out);
    if (sweep->parsed()) return cmd_sweep(config, ckpt, arms, sweep_seeds, out);
    if (report->parsed()) return cmd_report(runs_path, out);
    if (gridgen->parsed()) return cmd_gridgen(preset, out == "out" ? "grid.json" : out, seed);
    if (diag->parsed()) return cmd_diag(diag_kappa, diag_sigma, diag_tau, diag_steps,
                                        diag_window, seed == 0 ? 1 : seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
