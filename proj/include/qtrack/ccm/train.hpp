#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "qtrack/ccm/residual.hpp"
#include "qtrack/nn/optim.hpp"

namespace qtrack::ccm {

struct TrainSample {
  Eigen::VectorXd x;
  Eigen::VectorXd x_ref;
  Eigen::VectorXd u_ref;
};

using SampleFn = std::function<TrainSample(std::mt19937_64&)>;

struct MetricTrainConfig {
  int iterations = 3000;
  int batch = 32;
  double lr = 1e-3;
  double lr_final = 0.0;    // > 0 decays the rate geometrically to this value
  double w_lower = 1.0;     // metric floor penalty weight
  double w_upper = 1.0;     // metric cap penalty weight
  double w_residual = 10.0; // contraction penalty weight
  double eps_margin = 1e-4;
  std::uint64_t seed = 1;
  int log_every = 100;
  std::string nan_checkpoint_path;  // dump nets here on divergence, if set
};

struct MetricCurveRow {
  int iteration = 0;
  double loss = 0.0;
  double lower_pen = 0.0;
  double upper_pen = 0.0;
  double residual_pen = 0.0;
};

struct MetricTrainReport {
  double final_loss = 0.0;
  double violation_fraction = 1.0;
  double bound_violation_fraction = 1.0;
  bool aborted = false;
  std::vector<MetricCurveRow> curve;
};

MetricTrainReport train_nominal_metric(MetricNet& net, FeedbackGain& gain,
                                       const ControlAffineModel& model, const SampleFn& sample,
                                       const MetricTrainConfig& cfg);

/* Fraction of drawn states whose residual fails strict negative
 * definiteness. */
double residual_violation_fraction(const MetricNet& net, const FeedbackGain& gain,
                                   const ControlAffineModel& model, const SampleFn& sample,
                                   int n_samples, std::uint64_t seed);

/* Hover-tube sampler for the quadrotor task: perturbations around a level
 * reference in position, velocity, attitude, and body rate. */
SampleFn hover_tube_sampler(const dyn::ModelParams& params, double pos_box = 0.5,
                            double vel_box = 1.0, double tilt_max = 0.4, double rate_box = 1.0);

}  // namespace qtrack::ccm
