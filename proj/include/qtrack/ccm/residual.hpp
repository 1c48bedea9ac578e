#pragma once

#include "qtrack/ccm/metric_net.hpp"

namespace qtrack::ccm {

/* Directional derivative of M along xdot by central difference. */
Eigen::MatrixXd metric_dot(const MetricNet& net, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& xdot);

/* Contraction condition left-hand side Mdot + sym(M(A+BK)) + 2*lambda*M at
 * u = u_ref + K(x)(x - x_ref) on the disturbance-free plant, plus the
 * intermediates its backward pass needs. */
struct ResidualEval {
  Eigen::MatrixXd value;
  Eigen::VectorXd x, x_ref, u_ref, u, xdot;
  Eigen::MatrixXd m, mdot, a, b, k, acl;
};

ResidualEval contraction_residual(const MetricNet& net, const FeedbackGain& gain,
                                  const ControlAffineModel& model, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& x_ref, const Eigen::VectorXd& u_ref);

/* Pullback of a cotangent dC on the residual into both parameter vectors;
 * covers every theta path: M itself, the two shifted metric evaluations
 * inside Mdot (including their dependence on u through xdot), the BK term,
 * and A's input dependence. */
void residual_backward(const MetricNet& net, const FeedbackGain& gain,
                       const ControlAffineModel& model, const ResidualEval& ev,
                       const Eigen::MatrixXd& dC, Eigen::VectorXd& dtheta_metric,
                       Eigen::VectorXd& dtheta_gain);

/* Sum of squared margin-shifted positive eigenvalues of the symmetrized
 * input; zero exactly when A is below -eps_margin*I. */
double nd_penalty(const Eigen::MatrixXd& a, double eps_margin = 1e-4);

struct NdPenalty {
  double value = 0.0;
  Eigen::MatrixXd grad;
};

NdPenalty nd_penalty_grad(const Eigen::MatrixXd& a, double eps_margin = 1e-4);

}  // namespace qtrack::ccm
