#include "qtrack/ccm/metric_net.hpp"

#include <stdexcept>

namespace qtrack::ccm {

void CcmConfig::validate() const {
  if (!(m_lower > 0.0) || !(m_lower < m_upper))
    throw std::invalid_argument("ccm: need 0 < m_lower < m_upper");
  if (!(lambda > 0.0)) throw std::invalid_argument("ccm: lambda must be positive");
  if (!(overshoot >= 1.0)) throw std::invalid_argument("ccm: overshoot must be >= 1");
  if (!(fd_step > 0.0)) throw std::invalid_argument("ccm: fd_step must be positive");
}

int vech_index(int row, int col, int n) {
  if (row < col || col < 0 || row >= n) throw std::invalid_argument("vech: bad index");
  /* Column-major walk down the lower triangle. */
  return col * n - col * (col - 1) / 2 + (row - col);
}

int vech_size(int n) { return n * (n + 1) / 2; }

Eigen::VectorXd vech_lower(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  Eigen::VectorXd v(vech_size(n));
  for (int c = 0; c < n; ++c)
    for (int r = c; r < n; ++r) v[vech_index(r, c, n)] = a(r, c);
  return v;
}

Eigen::MatrixXd unvech_lower(const Eigen::VectorXd& v, int n) {
  if (v.size() != vech_size(n)) throw std::invalid_argument("vech: size mismatch");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int c = 0; c < n; ++c)
    for (int r = c; r < n; ++r) a(r, c) = v[vech_index(r, c, n)];
  return a;
}

Eigen::VectorXd vech_symmetric(const Eigen::MatrixXd& a) { return vech_lower(a); }

Eigen::MatrixXd unvech_symmetric(const Eigen::VectorXd& v, int n) {
  Eigen::MatrixXd a = unvech_lower(v, n);
  for (int c = 0; c < n; ++c)
    for (int r = c + 1; r < n; ++r) a(c, r) = a(r, c);
  return a;
}

ControlAffineModel quadrotor_model(const dyn::ModelParams& params) {
  params.validate();
  ControlAffineModel m;
  m.state_dim = dyn::QuadState::kDim;
  m.input_dim = 4;
  m.feature_dim = 10;
  m.deriv = [params](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return dyn::state_derivative(x, u, dyn::Disturbance{}, params);
  };
  m.jacobians = [params](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    auto [a, b] = dyn::linearize(x, u, params);
    return std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(a, b);
  };
  m.a_u_cotangent = [params](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                             const Eigen::MatrixXd& da) -> Eigen::VectorXd {
    /* Only the velocity-attitude block of A scales with collective thrust,
     * and every rotor contributes to it equally. */
    const Eigen::Vector4d q = x.segment<4>(6);
    const double w = q[0];
    const Eigen::Vector3d u3 = q.tail<3>();
    const Eigen::Vector3d ez(0, 0, 1);
    Eigen::Matrix<double, 3, 4> dRv;
    dRv.col(0) = 2.0 * w * ez + 2.0 * u3.cross(ez);
    dRv.block<3, 3>(0, 1) = -2.0 * ez * u3.transpose() + 2.0 * u3 * ez.transpose() +
                            2.0 * u3.dot(ez) * Eigen::Matrix3d::Identity() -
                            2.0 * w * dyn::skew(ez);
    const double sens = (da.block<3, 4>(3, 6).array() * dRv.array()).sum() / params.mass;
    return Eigen::Vector4d::Constant(sens);
  };
  m.features = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x.tail(10); };
  m.features_pullback = [](const Eigen::VectorXd& df) -> Eigen::VectorXd {
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(13);
    dx.tail(10) = df;
    return dx;
  };
  return m;
}

ControlAffineModel double_integrator_model() {
  ControlAffineModel m;
  m.state_dim = 2;
  m.input_dim = 1;
  m.feature_dim = 2;
  Eigen::Matrix2d a;
  a << 0, 1, 0, 0;
  Eigen::Vector2d b(0, 1);
  m.deriv = [a, b](const Eigen::VectorXd& x, const Eigen::VectorXd& u) -> Eigen::VectorXd {
    return a * x + b * u[0];
  };
  m.jacobians = [a, b](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(a, b);
  };
  m.a_u_cotangent = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                       const Eigen::MatrixXd&) -> Eigen::VectorXd {
    return Eigen::VectorXd::Zero(1);
  };
  m.features = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x; };
  m.features_pullback = [](const Eigen::VectorXd& df) -> Eigen::VectorXd { return df; };
  return m;
}

MetricNet MetricNet::make(const CcmConfig& cfg, const ControlAffineModel& model,
                          const std::vector<int>& hidden, std::uint64_t seed) {
  cfg.validate();
  MetricNet net;
  net.cfg = cfg;
  net.state_dim = model.state_dim;
  net.features = model.features;
  net.features_pullback = model.features_pullback;
  net.spec.widths.push_back(model.feature_dim);
  for (int h : hidden) net.spec.widths.push_back(h);
  net.spec.widths.push_back(vech_size(model.state_dim));
  net.spec.activation = nn::Activation::Tanh;
  net.theta = nn::init_params(net.spec, seed);
  return net;
}

Eigen::MatrixXd MetricNet::lower_factor(const Eigen::VectorXd& x) const {
  return unvech_lower(nn::forward(spec, theta, features(x)), state_dim);
}

Eigen::MatrixXd MetricNet::metric(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd l = lower_factor(x);
  Eigen::MatrixXd m = l * l.transpose();
  m.diagonal().array() += cfg.m_lower;
  /* Exact symmetry, not just up to rounding. */
  for (int c = 0; c < state_dim; ++c)
    for (int r = c + 1; r < state_dim; ++r) m(c, r) = m(r, c);
  return m;
}

void metric_backward(const MetricNet& net, const Eigen::VectorXd& x, const Eigen::MatrixXd& dM,
                     Eigen::VectorXd& dtheta, Eigen::VectorXd* dx) {
  const Eigen::VectorXd feat = net.features(x);
  nn::ForwardCache cache;
  const Eigen::VectorXd lv = nn::forward_batch(net.spec, net.theta, feat, &cache).col(0);
  const Eigen::MatrixXd l = unvech_lower(lv, net.state_dim);
  const Eigen::MatrixXd dL = (dM + dM.transpose()) * l;
  const Eigen::VectorXd cot = vech_lower(dL);
  const nn::BackwardResult back = nn::backward_batch(net.spec, net.theta, cache, cot);
  dtheta += back.dtheta;
  if (dx) *dx = net.features_pullback(back.dinput.col(0));
}

FeedbackGain FeedbackGain::make(const ControlAffineModel& model, const std::vector<int>& hidden,
                                double scale, std::uint64_t seed) {
  FeedbackGain g;
  g.state_dim = model.state_dim;
  g.input_dim = model.input_dim;
  g.base = Eigen::MatrixXd::Zero(model.input_dim, model.state_dim);
  g.features = model.features;
  g.features_pullback = model.features_pullback;
  g.spec.widths.push_back(model.feature_dim);
  for (int h : hidden) g.spec.widths.push_back(h);
  g.spec.widths.push_back(model.input_dim * model.state_dim);
  g.spec.activation = nn::Activation::Tanh;
  g.spec.output = nn::OutputTransform::ScaledTanh;
  g.spec.output_scale = scale;
  g.theta = nn::init_params(g.spec, seed);
  return g;
}

Eigen::MatrixXd FeedbackGain::gain(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd k = nn::forward(spec, theta, features(x));
  return base + Eigen::Map<const Eigen::MatrixXd>(k.data(), input_dim, state_dim);
}

void gain_backward(const FeedbackGain& net, const Eigen::VectorXd& x, const Eigen::MatrixXd& dK,
                   Eigen::VectorXd& dtheta, Eigen::VectorXd* dx) {
  const Eigen::VectorXd feat = net.features(x);
  nn::ForwardCache cache;
  nn::forward_batch(net.spec, net.theta, feat, &cache);
  const Eigen::VectorXd cot =
      Eigen::Map<const Eigen::VectorXd>(dK.data(), dK.rows() * dK.cols());
  const nn::BackwardResult back = nn::backward_batch(net.spec, net.theta, cache, cot);
  dtheta += back.dtheta;
  if (dx) *dx = net.features_pullback(back.dinput.col(0));
}

Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                         const Eigen::VectorXd& q_diag, const Eigen::VectorXd& r_diag, double dt,
                         int max_iterations, double tol) {
  const int n = static_cast<int>(a.rows());
  const Eigen::MatrixXd ad = Eigen::MatrixXd::Identity(n, n) + dt * a + 0.5 * dt * dt * a * a;
  const Eigen::MatrixXd bd = dt * b + 0.5 * dt * dt * a * b;
  const Eigen::MatrixXd q = (dt * q_diag).asDiagonal();
  const Eigen::MatrixXd r = (dt * r_diag).asDiagonal();

  Eigen::MatrixXd p = q;
  Eigen::MatrixXd k;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::MatrixXd btp = bd.transpose() * p;
    k = (r + btp * bd).ldlt().solve(btp * ad);
    const Eigen::MatrixXd acl = ad - bd * k;
    const Eigen::MatrixXd next =
        q + k.transpose() * r * k + acl.transpose() * p * acl;
    const double gap = (next - p).cwiseAbs().maxCoeff();
    p = 0.5 * (next + next.transpose());
    if (gap < tol) break;
  }
  /* Deviation feedback u = K (x - x_ref) wants the negated Riccati gain. */
  return -k;
}

}  // namespace qtrack::ccm
