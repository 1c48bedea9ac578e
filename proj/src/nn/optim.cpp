#include "qtrack/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace qtrack::nn {

void Optimizer::step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  if (grad.size() != theta.size()) throw std::invalid_argument("optim: grad size mismatch");
  if (!grad.allFinite()) {
    ++skipped_steps;
    return;
  }
  if (rule == UpdateRule::Sgd) {
    ++step_count;
    theta -= lr * grad;
    return;
  }
  if (m.size() != theta.size()) {
    m = Eigen::VectorXd::Zero(theta.size());
    v = Eigen::VectorXd::Zero(theta.size());
  }
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  theta -= (lr / bc1) * m.cwiseQuotient(((v / bc2).cwiseSqrt().array() + eps).matrix());
}

void Optimizer::reset() {
  step_count = 0;
  skipped_steps = 0;
  m.resize(0);
  v.resize(0);
}

}  // namespace qtrack::nn
