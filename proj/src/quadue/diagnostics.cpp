#include "qtrack/quadue/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qtrack::quadue {
namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

AccelerationReport acceleration_diagnostics(const DiagnosticsRecord& record, double tau,
                                            int window) {
  if (window < 1) throw std::invalid_argument("diagnostics: window must be positive");
  if (record.steps() < static_cast<size_t>(window)) {
    throw std::invalid_argument("diagnostics: fewer recorded steps than the window");
  }

  AccelerationReport report;
  report.tau = tau;
  report.window = window;

  report.sigma_sq = record.sigma_sq_configured >= 0.0 ? record.sigma_sq_configured
                                                      : mean_of(record.single_var);
  const double batch_var = mean_of(record.minibatch_var);
  report.kappa_hat = report.sigma_sq > 0.0 ? batch_var / report.sigma_sq : 0.0;

  if (std::isinf(tau)) {
    report.case1 = true;
    report.threshold = std::numeric_limits<double>::infinity();
    report.crossed = true;
    report.crossed_at_step = 1;
    report.running_average = mean_of(record.grad_sq);
    return report;
  }

  const double tau_sq = tau * tau;
  report.case1 =
      report.sigma_sq <= 0.0 || report.kappa_hat <= 0.25 * tau_sq / report.sigma_sq;
  report.threshold = report.case1 ? tau_sq : 4.0 * report.kappa_hat * tau_sq;

  // Windowed running average of the squared gradient norm; the report keeps
  // the first window whose mean is within the regime threshold.
  double acc = 0.0;
  for (size_t i = 0; i < record.grad_sq.size(); ++i) {
    acc += record.grad_sq[i];
    if (i >= static_cast<size_t>(window)) acc -= record.grad_sq[i - window];
    if (i + 1 >= static_cast<size_t>(window)) {
      const double avg = acc / window;
      report.running_average = avg;
      if (!report.crossed && avg <= report.threshold) {
        report.crossed = true;
        report.crossed_at_step = static_cast<int>(i) + 1;
      }
    }
  }
  return report;
}

}  // namespace qtrack::quadue
