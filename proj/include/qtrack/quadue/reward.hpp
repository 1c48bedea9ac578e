#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qtrack/ccm/metric_net.hpp"

namespace qtrack::quadue {

struct RewardWeights {
  double w_c1 = 1.0;   // metric floor penalty
  double w_c2 = 1.0;   // metric cap penalty
  double w_c3 = 10.0;  // contraction penalty
  Eigen::VectorXd h1_diag;  // 13 entries
  Eigen::VectorXd h2_diag;  // 4 entries
  double eps_margin = 0.0;  // penalties activate exactly at semidefiniteness

  RewardWeights();
  void validate() const;
};

struct RewardBreakdown {
  double total = 0.0;
  double contraction = 0.0;
  double track = 0.0;
};

// Corrected contraction estimate: the nominal residual plus the learned
// offsets, the input-linear blocks contracted with u. All terms symmetric.
Eigen::MatrixXd chat_estimate(const Eigen::MatrixXd& cbar, const Eigen::MatrixXd& mu1,
                              const std::vector<Eigen::MatrixXd>& mu2, const Eigen::VectorXd& u);

// Penalty-form reward: metric floor/cap terms, the contraction term on the
// corrected residual (which already carries its rate shift), and quadratic
// tracking costs. Always <= 0.
RewardBreakdown reward(const ccm::MetricNet& metric_net, const Eigen::MatrixXd& chat,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref,
                       const Eigen::VectorXd& u, const RewardWeights& weights);

}  // namespace qtrack::quadue
