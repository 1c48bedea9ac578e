#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "qtrack/ccm/metric_net.hpp"
#include "qtrack/dyn/quad_model.hpp"
#include "qtrack/dyn/reference.hpp"
#include "qtrack/mpc/qp.hpp"

namespace qtrack::mpc {

enum class ContractionMode { kHardLinearized, kSoftPenalty, kOff };

struct MpcConfig {
  double ts = 0.05;
  int horizon = 20;
  Eigen::VectorXd h1_diag;  // 13 entries
  Eigen::VectorXd h2_diag;  // 4 entries
  ContractionMode mode = ContractionMode::kHardLinearized;
  double omega_ccm = 1.0;
  double slack_weight = 100.0;
  QpSettings solver;

  MpcConfig();
  // Throws std::invalid_argument when T_s <= 0, N < 2, or weights are not PD.
  void validate() const;
};

// Variable layout of the tracking QP:
//   z = [dx_1..dx_N | du_0..du_{N-1} | s_1..s_N (hard mode only)].
struct TrackingQpLayout {
  int nx = 13;
  int nu = 4;
  int horizon = 0;
  int n_slack = 0;

  int dx_offset(int k) const { return (k - 1) * nx; }            // k in 1..N
  int du_offset(int k) const { return horizon * nx + k * nu; }   // k in 0..N-1
  int slack_offset(int k) const {                                // k in 1..N
    return horizon * (nx + nu) + (k - 1);
  }
  int num_vars() const { return horizon * (nx + nu) + n_slack; }
};

// Builds the horizon tracking QP: quadratic deviation cost, dynamics
// linearized about the reference as equality rows, rotor-thrust box
// constraints, and the contraction surrogate rows when enabled.
// prev_dx supplies the deviation predictions the contraction rows are
// linearized about (one 13-vector per stage 1..N); pass nullptr on cold start.
QpProblem build_tracking_qp(const Eigen::VectorXd& x_now,
                            const std::vector<dyn::ReferencePoint>& window,
                            const Eigen::MatrixXd& chat, const Eigen::MatrixXd& metric,
                            const MpcConfig& cfg, const dyn::ModelParams& params,
                            const std::vector<Eigen::VectorXd>* prev_dx,
                            TrackingQpLayout* layout_out = nullptr,
                            const Eigen::Vector3d& accel_offset = Eigen::Vector3d::Zero());

struct MpcStepInfo {
  Eigen::Vector4d u = Eigen::Vector4d::Zero();
  bool fallback = false;
  QpStatus status = QpStatus::kInvalidProblem;
  int iterations = 0;
  double slack_max = 0.0;
  double chat_lmax = 0.0;
  // Metric-weighted deviation energy: measured now, and the model's
  // prediction for the next step (from the previous solve).
  double realized_energy = 0.0;
  double predicted_energy = 0.0;
};

class TrackingMpc {
 public:
  TrackingMpc(MpcConfig cfg, dyn::ModelParams params);

  void set_fallback_gain(std::shared_ptr<const ccm::FeedbackGain> gain);

  // Known world-frame acceleration offset (an estimated disturbance) the
  // prediction model accounts for; zero keeps the nominal model.
  void set_disturbance(const Eigen::Vector3d& accel);

  void reset();

  // Solves one receding-horizon step. The window must hold at least
  // horizon+1 reference points starting at the current time.
  MpcStepInfo control_step(const Eigen::VectorXd& x_now,
                           const std::vector<dyn::ReferencePoint>& window,
                           const Eigen::MatrixXd& chat, const Eigen::MatrixXd& metric);

  const MpcConfig& config() const { return cfg_; }

 private:
  MpcConfig cfg_;
  dyn::ModelParams params_;
  std::shared_ptr<const ccm::FeedbackGain> fallback_gain_;
  Eigen::Vector3d accel_offset_ = Eigen::Vector3d::Zero();
  QpSolution prev_solution_;
  bool warm_ = false;
  std::vector<Eigen::VectorXd> pred_dx_;
  double pending_predicted_energy_ = 0.0;
  bool has_prediction_ = false;
};

// Deviation of x from a reference state with the quaternion block taken in
// the sign-consistent representative (q and -q denote one attitude).
Eigen::VectorXd state_deviation(const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref);

}  // namespace qtrack::mpc
