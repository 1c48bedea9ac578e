#include "qtrack/distrl/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "qtrack/distrl/distribution.hpp"

namespace qtrack::distrl {

double huber(double u, double kappa) {
  if (!std::isfinite(kappa)) return 0.5 * u * u;
  if (!(kappa > 0.0)) throw std::invalid_argument("loss: kappa must be positive");
  const double au = std::abs(u);
  if (au <= kappa) return 0.5 * u * u;
  return kappa * (au - 0.5 * kappa);
}

double huber_grad(double u, double kappa) {
  if (!std::isfinite(kappa)) return u;
  if (!(kappa > 0.0)) throw std::invalid_argument("loss: kappa must be positive");
  if (std::abs(u) <= kappa) return u;
  return u > 0.0 ? kappa : -kappa;
}

LossResult quantile_huber_loss(const Eigen::VectorXd& predicted, const Eigen::VectorXd& targets,
                               double kappa) {
  const int n = static_cast<int>(predicted.size());
  const int m = static_cast<int>(targets.size());
  if (n == 0 || m == 0) throw std::invalid_argument("loss: empty atoms");
  const Eigen::VectorXd tau = quantile_midpoints(n);

  LossResult out;
  out.grad = Eigen::VectorXd::Zero(n);
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const double u = targets[j] - predicted[i];
      const double w = std::abs(tau[i] - (u < 0.0 ? 1.0 : 0.0));
      out.loss += scale * w * huber(u, kappa);
      out.grad[i] -= scale * w * huber_grad(u, kappa);
    }
  return out;
}

LossResult kl_histogram_loss(const Eigen::VectorXd& p, const Eigen::VectorXd& q, double eps) {
  if (p.size() != q.size() || p.size() == 0) throw std::invalid_argument("loss: histogram size");
  if (!(eps > 0.0)) throw std::invalid_argument("loss: eps must be positive");
  Eigen::VectorXd pf = p.cwiseMax(eps);
  Eigen::VectorXd qf = q.cwiseMax(eps);
  pf /= pf.sum();
  const double qsum = qf.sum();

  LossResult out;
  out.grad = Eigen::VectorXd::Zero(q.size());
  for (int i = 0; i < p.size(); ++i) out.loss += pf[i] * std::log(pf[i] / (qf[i] / qsum));
  /* d/dq_j of sum_i pf_i (log pf_i - log qf_j + log qsum), through the floor. */
  for (int j = 0; j < q.size(); ++j) {
    if (q[j] < eps) continue;
    out.grad[j] = -pf[j] / qf[j] + 1.0 / qsum;
  }
  return out;
}

double kl_histogram_loss(const DiscreteDist& p, const DiscreteDist& q, double eps) {
  if (p.values.size() != q.values.size())
    throw std::invalid_argument("loss: histograms must share one bin grid");
  for (size_t i = 0; i < p.values.size(); ++i)
    if (p.values[i] != q.values[i])
      throw std::invalid_argument("loss: histograms must share one bin grid");
  double loss = 0.0;
  for (size_t i = 0; i < p.values.size(); ++i) {
    if (p.probs[i] == 0.0) continue;
    const double qi = std::max(q.probs[i], eps);
    if (!(qi > 0.0)) throw std::invalid_argument("loss: target support not covered");
    loss += p.probs[i] * std::log(p.probs[i] / qi);
  }
  return loss;
}

}  // namespace qtrack::distrl
