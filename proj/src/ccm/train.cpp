#include "qtrack/ccm/train.hpp"

#include <cmath>

#include "qtrack/nn/checkpoint.hpp"

namespace qtrack::ccm {

MetricTrainReport train_nominal_metric(MetricNet& net, FeedbackGain& gain,
                                       const ControlAffineModel& model, const SampleFn& sample,
                                       const MetricTrainConfig& cfg) {
  MetricTrainReport report;
  std::mt19937_64 rng(cfg.seed);
  nn::Optimizer opt_metric;
  nn::Optimizer opt_gain;
  opt_metric.lr = cfg.lr;
  opt_gain.lr = cfg.lr;

  const int n = model.state_dim;
  const Eigen::MatrixXd floor_target = net.cfg.m_lower * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd cap_target = net.cfg.m_upper * Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd g_metric(net.theta.size());
  Eigen::VectorXd g_gain(gain.theta.size());

  const double decay = (cfg.lr_final > 0.0 && cfg.iterations > 1)
                           ? std::pow(cfg.lr_final / cfg.lr, 1.0 / (cfg.iterations - 1))
                           : 1.0;

  for (int it = 0; it < cfg.iterations; ++it) {
    opt_metric.lr = cfg.lr * std::pow(decay, it);
    opt_gain.lr = opt_metric.lr;
    g_metric.setZero();
    g_gain.setZero();
    double loss = 0.0, low_pen = 0.0, up_pen = 0.0, res_pen = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const TrainSample ts = sample(rng);
      const Eigen::MatrixXd m = net.metric(ts.x);

      const NdPenalty low = nd_penalty_grad(floor_target - m, cfg.eps_margin);
      if (low.value > 0.0)
        metric_backward(net, ts.x, -cfg.w_lower * low.grad, g_metric);

      const NdPenalty up = nd_penalty_grad(m - cap_target, cfg.eps_margin);
      if (up.value > 0.0)
        metric_backward(net, ts.x, cfg.w_upper * up.grad, g_metric);

      const ResidualEval ev = contraction_residual(net, gain, model, ts.x, ts.x_ref, ts.u_ref);
      const NdPenalty res = nd_penalty_grad(ev.value, cfg.eps_margin);
      if (res.value > 0.0)
        residual_backward(net, gain, model, ev, cfg.w_residual * res.grad, g_metric, g_gain);

      low_pen += low.value;
      up_pen += up.value;
      res_pen += res.value;
      loss += cfg.w_lower * low.value + cfg.w_upper * up.value + cfg.w_residual * res.value;
    }
    const double inv = 1.0 / cfg.batch;
    loss *= inv;
    g_metric *= inv;
    g_gain *= inv;

    if (!std::isfinite(loss)) {
      report.aborted = true;
      if (!cfg.nan_checkpoint_path.empty()) {
        nn::Checkpoint ck;
        ck.nets["metric"] = {net.spec, net.theta};
        ck.nets["gain"] = {gain.spec, gain.theta};
        ck.metadata_json = "{\"aborted_at_iteration\":" + std::to_string(it) + "}";
        save_checkpoint(cfg.nan_checkpoint_path, ck);
      }
      break;
    }

    opt_metric.step(net.theta, g_metric);
    opt_gain.step(gain.theta, g_gain);

    if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
      report.curve.push_back({it, loss, low_pen * inv, up_pen * inv, res_pen * inv});
      report.final_loss = loss;
    }
  }

  std::mt19937_64 vrng(cfg.seed + 7919);
  int viol = 0, bound_viol = 0;
  const int n_val = 500;
  for (int i = 0; i < n_val; ++i) {
    const TrainSample ts = sample(vrng);
    const ResidualEval ev = contraction_residual(net, gain, model, ts.x, ts.x_ref, ts.u_ref);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ev.value, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().maxCoeff() >= 0.0) ++viol;
    const Eigen::MatrixXd m = net.metric(ts.x);
    if (nd_penalty(floor_target - m, 0.0) > 0.0 || nd_penalty(m - cap_target, 0.0) > 0.0)
      ++bound_viol;
  }
  report.violation_fraction = static_cast<double>(viol) / n_val;
  report.bound_violation_fraction = static_cast<double>(bound_viol) / n_val;
  return report;
}

double residual_violation_fraction(const MetricNet& net, const FeedbackGain& gain,
                                   const ControlAffineModel& model, const SampleFn& sample,
                                   int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int viol = 0;
  for (int i = 0; i < n_samples; ++i) {
    const TrainSample ts = sample(rng);
    const ResidualEval ev = contraction_residual(net, gain, model, ts.x, ts.x_ref, ts.u_ref);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ev.value, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().maxCoeff() >= 0.0) ++viol;
  }
  return static_cast<double>(viol) / n_samples;
}

SampleFn hover_tube_sampler(const dyn::ModelParams& params, double pos_box, double vel_box,
                            double tilt_max, double rate_box) {
  const Eigen::VectorXd u_hover = dyn::hover_input(params);
  return [=](std::mt19937_64& rng) -> TrainSample {
    std::uniform_real_distribution<double> u01(-1.0, 1.0);
    dyn::QuadState ref;  // level hover at the origin
    dyn::QuadState s;
    for (int i = 0; i < 3; ++i) {
      s.p[i] = pos_box * u01(rng);
      s.v[i] = vel_box * u01(rng);
      s.omega[i] = rate_box * u01(rng);
    }
    Eigen::Vector3d axis(u01(rng), u01(rng), u01(rng));
    if (axis.norm() < 1e-9) axis = Eigen::Vector3d::UnitX();
    axis.normalize();
    const double angle = 0.5 * tilt_max * (u01(rng) + 1.0);
    s.q[0] = std::cos(angle / 2.0);
    s.q.tail<3>() = std::sin(angle / 2.0) * axis;

    TrainSample ts;
    ts.x = s.to_vector();
    ts.x_ref = ref.to_vector();
    ts.u_ref = u_hover;
    return ts;
  };
}

}  // namespace qtrack::ccm
