#pragma once

#include <Eigen/Dense>
#include <functional>

#include "qtrack/dyn/quad_model.hpp"
#include "qtrack/nn/mlp.hpp"

namespace qtrack::ccm {

struct CcmConfig {
  double lambda = 0.5;     // contraction rate (1/s)
  double m_lower = 0.1;    // metric eigenvalue floor
  double m_upper = 10.0;   // metric eigenvalue cap (penalty target)
  double overshoot = 1.0;  // reported diagnostic, no computational role
  double fd_step = 1e-4;   // directional-derivative step

  void validate() const;
};

/* Half-vectorization index map for n x n lower triangles, row >= col. */
int vech_index(int row, int col, int n);
int vech_size(int n);
Eigen::VectorXd vech_lower(const Eigen::MatrixXd& a);
Eigen::MatrixXd unvech_lower(const Eigen::VectorXd& v, int n);
Eigen::VectorXd vech_symmetric(const Eigen::MatrixXd& a);
Eigen::MatrixXd unvech_symmetric(const Eigen::VectorXd& v, int n);

/* Control-affine plant interface the metric machinery works against, so the
 * same training loop serves the quadrotor and low-dimensional test systems. */
struct ControlAffineModel {
  int state_dim = 0;
  int input_dim = 0;
  int feature_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> deriv;
  std::function<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(const Eigen::VectorXd&,
                                                            const Eigen::VectorXd&)>
      jacobians;
  /* Pullback of a cotangent on A(x,u) onto u; zero for plants whose Jacobian
   * does not depend on the input. */
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                const Eigen::MatrixXd&)>
      a_u_cotangent;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> features;
  /* Pullback of a feature cotangent onto the state. */
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> features_pullback;
};

ControlAffineModel quadrotor_model(const dyn::ModelParams& params);
ControlAffineModel double_integrator_model();

/* State-dependent metric M(x) = L(x)L(x)^T + m_lower*I with L lower
 * triangular from the network output; symmetric positive definite for every
 * parameter vector by construction. */
struct MetricNet {
  CcmConfig cfg;
  nn::MlpSpec spec;
  Eigen::VectorXd theta;
  int state_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> features;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> features_pullback;

  static MetricNet make(const CcmConfig& cfg, const ControlAffineModel& model,
                        const std::vector<int>& hidden, std::uint64_t seed);

  Eigen::MatrixXd lower_factor(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd metric(const Eigen::VectorXd& x) const;
};

/* Accumulates d<dM, M(x)>/dtheta; optionally also returns the state
 * cotangent for directional-derivative chains. */
void metric_backward(const MetricNet& net, const Eigen::VectorXd& x, const Eigen::MatrixXd& dM,
                     Eigen::VectorXd& dtheta, Eigen::VectorXd* dx = nullptr);

/* Feedback gain K(x) (input_dim x state_dim), u = u_ref + K(x)(x - x_ref).
 * Network output is tanh-saturated around an optional fixed base gain. */
struct FeedbackGain {
  nn::MlpSpec spec;
  Eigen::VectorXd theta;
  Eigen::MatrixXd base;  // input_dim x state_dim
  int state_dim = 0;
  int input_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> features;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> features_pullback;

  static FeedbackGain make(const ControlAffineModel& model, const std::vector<int>& hidden,
                           double scale, std::uint64_t seed);

  Eigen::MatrixXd gain(const Eigen::VectorXd& x) const;
};

void gain_backward(const FeedbackGain& net, const Eigen::VectorXd& x, const Eigen::MatrixXd& dK,
                   Eigen::VectorXd& dtheta, Eigen::VectorXd* dx = nullptr);

/* Infinite-horizon discrete Riccati gain, used to seed the base gain. */
Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         const Eigen::VectorXd& q_diag, const Eigen::VectorXd& r_diag, double dt,
                         int max_iterations = 20000, double tol = 1e-10);

}  // namespace qtrack::ccm
