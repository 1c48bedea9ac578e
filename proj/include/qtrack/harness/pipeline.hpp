#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "qtrack/ccm/train.hpp"
#include "qtrack/harness/config.hpp"
#include "qtrack/harness/runner.hpp"
#include "qtrack/quadue/diagnostics.hpp"
#include "qtrack/quadue/train.hpp"

namespace qtrack::harness {

struct TrainedArtifacts {
  std::shared_ptr<ccm::MetricNet> metric;
  std::shared_ptr<ccm::FeedbackGain> gain;
  std::shared_ptr<quadue::UncertaintyAgent> agent;  // null when phase 2 did not run
  ccm::MetricTrainReport phase1;
  std::vector<quadue::CurveRow> curves;
  quadue::AccelerationReport accel;
  bool phase2_ran = false;
  std::string phase2_block_reason;

  ArmModels models() const { return {metric, gain, agent}; }
};

// Builds the nominal metric and gain around the hover reference; the LQR
// solution at hover seeds the gain's base term.
void make_nominal_pair(const ScenarioConfig& cfg, const ccm::ControlAffineModel& ca,
                       ccm::MetricNet& metric, ccm::FeedbackGain& gain);

/* Phase 1 trains the nominal metric and gain on the hover tube; its
 * residual-violation fraction gates phase 2. Phase 2 trains the correction
 * actor episodically against per-episode zone forces drawn from the
 * configured range. Artifacts, curves, and diagnostics land in out_dir when
 * it is non-empty. */
TrainedArtifacts train_pipeline(const ScenarioConfig& cfg, const std::string& out_dir = "",
                                std::ostream* log = nullptr);

void save_artifacts(const std::string& dir, const TrainedArtifacts& art,
                    const ScenarioConfig& cfg);
TrainedArtifacts load_artifacts(const std::string& dir, const ScenarioConfig& cfg);

struct ArmSummary {
  std::string arm;
  int runs = 0;
  double success_rate = 0.0;
  double mean_time = 0.0;      // over completed runs
  double median_error = 0.0;   // accumulated tracking error
  double mean_error = 0.0;
  double median_lambda = 0.0;  // over valid fits
  double median_r2 = 0.0;
};

double median(std::vector<double> v);

ArmSummary summarize_arm(const std::string& arm, const std::vector<RunMetrics>& runs);

/* Comparison table across arms; the first row is the baseline the
 * improvement percentages are measured against, as
 * (err_base - err_arm) / err_base. */
void compare_report(const std::vector<ArmSummary>& arms, const std::string& csv_path,
                    const std::string& md_path);

}  // namespace qtrack::harness
