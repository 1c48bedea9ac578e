#pragma once

#include <Eigen/Dense>

namespace qtrack::distrl {

/* Huber with threshold kappa; a non-finite kappa degrades to the pure
 * quadratic 0.5 u^2. */
double huber(double u, double kappa);
double huber_grad(double u, double kappa);

struct LossResult {
  double loss = 0.0;
  Eigen::VectorXd grad;  // d loss / d predicted
};

/* Asymmetric Huber pinball loss between predicted quantile atoms and target
 * samples, averaged over both atom and target indices. */
LossResult quantile_huber_loss(const Eigen::VectorXd& predicted, const Eigen::VectorXd& targets,
                               double kappa);

/* KL(p || q) over histograms with epsilon flooring on both sides; gradient
 * is with respect to q. */
LossResult kl_histogram_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double eps);

struct DiscreteDist;

/* Same loss for two distributions declared over one shared bin grid. */
double kl_histogram_loss(const DiscreteDist& p, const DiscreteDist& q, double eps);

}  // namespace qtrack::distrl
