#include "qtrack/quadue/reward.hpp"

#include <stdexcept>

#include "qtrack/ccm/residual.hpp"

namespace qtrack::quadue {

RewardWeights::RewardWeights() {
  h1_diag.resize(13);
  h1_diag << 2.5e-2, 2.5e-2, 2.5e-2, 1e-3, 1e-3, 1e-3, 2.5e-3, 2.5e-3, 2.5e-3, 2.5e-3, 1e-5,
      1e-5, 1e-5;
  h2_diag = Eigen::Vector4d::Constant(1.25e-4);
}

void RewardWeights::validate() const {
  if (w_c1 < 0.0 || w_c2 < 0.0 || w_c3 < 0.0) {
    throw std::invalid_argument("reward: negative penalty weight");
  }
  if (h1_diag.minCoeff() <= 0.0 || h2_diag.minCoeff() <= 0.0) {
    throw std::invalid_argument("reward: tracking weights must be positive definite");
  }
}

Eigen::MatrixXd chat_estimate(const Eigen::MatrixXd& cbar, const Eigen::MatrixXd& mu1,
                              const std::vector<Eigen::MatrixXd>& mu2, const Eigen::VectorXd& u) {
  const auto n = cbar.rows();
  if (cbar.cols() != n || mu1.rows() != n || mu1.cols() != n) {
    throw std::invalid_argument("chat: square matrices of one size required");
  }
  if (static_cast<Eigen::Index>(mu2.size()) != u.size()) {
    throw std::invalid_argument("chat: one mu2 block per input channel");
  }
  Eigen::MatrixXd chat = cbar + mu1;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const Eigen::MatrixXd& block = mu2[static_cast<size_t>(j)];
    if (block.rows() != n || block.cols() != n) {
      throw std::invalid_argument("chat: mu2 block size mismatch");
    }
    chat += block * u[j];
  }
  return chat;
}

RewardBreakdown reward(const ccm::MetricNet& metric_net, const Eigen::MatrixXd& chat,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& x_ref,
                       const Eigen::VectorXd& u, const RewardWeights& weights) {
  weights.validate();
  if (x.size() != weights.h1_diag.size() || u.size() != weights.h2_diag.size()) {
    throw std::invalid_argument("reward: state or input width mismatch");
  }
  const Eigen::MatrixXd m = metric_net.metric(x);
  const auto n = m.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

  RewardBreakdown out;
  out.contraction = -weights.w_c1 * ccm::nd_penalty(metric_net.cfg.m_lower * eye - m,
                                                    weights.eps_margin) -
                    weights.w_c2 * ccm::nd_penalty(m - metric_net.cfg.m_upper * eye,
                                                   weights.eps_margin) -
                    weights.w_c3 * ccm::nd_penalty(chat, weights.eps_margin);
  const Eigen::VectorXd dx = x - x_ref;
  out.track = -dx.dot(weights.h1_diag.asDiagonal() * dx) - u.dot(weights.h2_diag.asDiagonal() * u);
  out.total = out.contraction + out.track;
  return out;
}

}  // namespace qtrack::quadue
