#include "qtrack/ccm/residual.hpp"

#include <cstdio>
#include <stdexcept>

namespace qtrack::ccm {

Eigen::MatrixXd metric_dot(const MetricNet& net, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& xdot) {
  const double h = net.cfg.fd_step;
  const Eigen::MatrixXd mp = net.metric(x + h * xdot);
  const Eigen::MatrixXd mm = net.metric(x - h * xdot);
  return (mp - mm) / (2.0 * h);
}

ResidualEval contraction_residual(const MetricNet& net, const FeedbackGain& gain,
                                  const ControlAffineModel& model, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& x_ref, const Eigen::VectorXd& u_ref) {
  ResidualEval ev;
  ev.x = x;
  ev.x_ref = x_ref;
  ev.u_ref = u_ref;
  ev.k = gain.gain(x);
  ev.u = u_ref + ev.k * (x - x_ref);
  ev.xdot = model.deriv(x, ev.u);
  std::tie(ev.a, ev.b) = model.jacobians(x, ev.u);
  ev.m = net.metric(x);
  ev.mdot = metric_dot(net, x, ev.xdot);
  ev.acl = ev.a + ev.b * ev.k;
  const Eigen::MatrixXd ma = ev.m * ev.acl;
  ev.value = ev.mdot + ma + ma.transpose() + 2.0 * net.cfg.lambda * ev.m;
  return ev;
}

void residual_backward(const MetricNet& net, const FeedbackGain& gain,
                       const ControlAffineModel& model, const ResidualEval& ev,
                       const Eigen::MatrixXd& dC, Eigen::VectorXd& dtheta_metric,
                       Eigen::VectorXd& dtheta_gain) {
  const Eigen::MatrixXd g = 0.5 * (dC + dC.transpose());
  const double h = net.cfg.fd_step;
  const double lambda = net.cfg.lambda;

  /* Direct M path: d<g, M Acl + Acl^T M + 2 lambda M>/dM. */
  const Eigen::MatrixXd dM = g * ev.acl.transpose() + ev.acl * g + 2.0 * lambda * g;
  metric_backward(net, ev.x, dM, dtheta_metric);

  /* Shifted evaluations inside Mdot: cotangent +/- g/(2h), tracking the
   * state pullback for the xdot chain. */
  Eigen::VectorXd dxp, dxm;
  metric_backward(net, ev.x + h * ev.xdot, g / (2.0 * h), dtheta_metric, &dxp);
  metric_backward(net, ev.x - h * ev.xdot, -g / (2.0 * h), dtheta_metric, &dxm);
  const Eigen::VectorXd dxdot = h * (dxp - dxm);

  /* A + BK path. */
  const Eigen::MatrixXd dAcl = 2.0 * ev.m * g;
  Eigen::MatrixXd dK = ev.b.transpose() * dAcl;

  /* Input cotangent: xdot = f(x, u) inside Mdot, plus A's u dependence. */
  Eigen::VectorXd du = ev.b.transpose() * dxdot;
  du += model.a_u_cotangent(ev.x, ev.u, dAcl);

  /* u = u_ref + K (x - x_ref). */
  dK += du * (ev.x - ev.x_ref).transpose();
  gain_backward(gain, ev.x, dK, dtheta_gain);
}

static Eigen::MatrixXd symmetrize_checked(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("nd_penalty: matrix must be square");
  const double gap = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (gap > 1e-9) {
    static bool warned = false;
    if (!warned) {
      std::fprintf(stderr, "nd_penalty: symmetrizing input (asymmetry %.3g)\n", gap);
      warned = true;
    }
  }
  return 0.5 * (a + a.transpose());
}

double nd_penalty(const Eigen::MatrixXd& a, double eps_margin) {
  const Eigen::MatrixXd s = symmetrize_checked(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
  double acc = 0.0;
  for (int i = 0; i < eig.eigenvalues().size(); ++i) {
    const double v = eig.eigenvalues()[i] + eps_margin;
    if (v > 0.0) acc += v * v;
  }
  return acc;
}

NdPenalty nd_penalty_grad(const Eigen::MatrixXd& a, double eps_margin) {
  const Eigen::MatrixXd s = symmetrize_checked(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  NdPenalty out;
  Eigen::VectorXd active = Eigen::VectorXd::Zero(s.rows());
  for (int i = 0; i < s.rows(); ++i) {
    const double v = eig.eigenvalues()[i] + eps_margin;
    if (v > 0.0) {
      out.value += v * v;
      active[i] = 2.0 * v;
    }
  }
  out.grad = eig.eigenvectors() * active.asDiagonal() * eig.eigenvectors().transpose();
  return out;
}

}  // namespace qtrack::ccm
