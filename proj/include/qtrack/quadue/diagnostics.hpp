#pragma once

#include <cstdint>
#include <vector>

namespace qtrack::quadue {

// Running record of gradient statistics for the convergence-rate
// classification. grad_sq holds per-step squared norms of the minibatch
// gradient; variance samples come from repeated draws at a fixed parameter
// vector, with sigma_sq the single-sample noise level (configured when the
// noise is injected, estimated from probes otherwise).
struct DiagnosticsRecord {
  std::vector<double> grad_sq;
  std::vector<double> minibatch_var;   // E || g_batch - g_full ||^2 probes
  std::vector<double> single_var;      // E || g_1 - g_full ||^2 probes
  double sigma_sq_configured = -1.0;   // < 0 means "estimate from single_var"
  double smoothness_kl2 = 1.0;         // k * l^2 scale used by the step-size rule

  void push_step(double grad_norm_sq) { grad_sq.push_back(grad_norm_sq); }
  void push_probe(double batch_var, double one_sample_var) {
    minibatch_var.push_back(batch_var);
    single_var.push_back(one_sample_var);
  }
  size_t steps() const { return grad_sq.size(); }
};

struct AccelerationReport {
  double kappa_hat = 0.0;
  double sigma_sq = 0.0;
  bool case1 = false;          // kappa_hat <= tau^2 / (4 sigma^2)
  double threshold = 0.0;      // tau^2 for case 1, 4 kappa tau^2 for case 2
  double running_average = 0.0;
  bool crossed = false;
  int crossed_at_step = -1;
  double tau = 0.0;
  int window = 0;
};

// Classifies a training record against the two stationarity regimes: the
// gradient-noise ratio decides the regime, and the report states when the
// windowed average of the squared gradient norm first crossed the regime's
// threshold.
AccelerationReport acceleration_diagnostics(const DiagnosticsRecord& record, double tau,
                                            int window);

}  // namespace qtrack::quadue
