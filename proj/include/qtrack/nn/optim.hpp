#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace qtrack::nn {

enum class UpdateRule : std::uint8_t { Adam = 0, Sgd = 1 };

/* Per-parameter-vector optimizer state. Moment buffers are sized lazily on
 * the first update. A non-finite gradient skips the step and raises the
 * skipped_steps counter instead of corrupting theta. */
struct Optimizer {
  UpdateRule rule = UpdateRule::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  std::int64_t step_count = 0;
  std::int64_t skipped_steps = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad);
  void reset();
};

}  // namespace qtrack::nn
