#include "qtrack/dyn/quad_model.hpp"

#include <stdexcept>

namespace qtrack::dyn {

Eigen::Matrix4d ModelParams::mixer() const {
  const double L = arm, k = torque_coeff;
  Eigen::Matrix4d W;
  W << 1, 1, 1, 1,
       0, L, 0, -L,
      -L, 0, L, 0,
       k, -k, k, -k;
  return W;
}

void ModelParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("model: mass must be positive");
  if (!(inertia.minCoeff() > 0.0)) throw std::invalid_argument("model: inertia must be positive");
  if (!(arm > 0.0) || !(torque_coeff > 0.0))
    throw std::invalid_argument("model: arm and torque_coeff must be positive");
  if (!(thrust_max > 0.0)) throw std::invalid_argument("model: thrust_max must be positive");
}

Vec13 QuadState::to_vector() const {
  Vec13 x;
  x << p, v, q, omega;
  return x;
}

QuadState QuadState::from_vector(const Vec13& x) {
  QuadState s;
  s.p = x.segment<3>(0);
  s.v = x.segment<3>(3);
  s.q = x.segment<4>(6);
  s.omega = x.segment<3>(10);
  return s;
}

void QuadState::normalize_quat() {
  const double n = q.norm();
  if (!(n > 0.0)) throw std::invalid_argument("state: zero quaternion");
  q /= n;
}

Eigen::Matrix3d skew(const Vec3& a) {
  Eigen::Matrix3d S;
  S << 0, -a.z(), a.y(),
       a.z(), 0, -a.x(),
      -a.y(), a.x(), 0;
  return S;
}

Vec3 rotate(const Vec4& q, const Vec3& v) {
  const double w = q[0];
  const Vec3 u = q.tail<3>();
  return (w * w - u.dot(u)) * v + 2.0 * u.dot(v) * u + 2.0 * w * u.cross(v);
}

Eigen::Matrix4d lambda_matrix(const Vec3& omega, QuatRateForm form) {
  const double x = omega.x(), y = omega.y(), z = omega.z();
  Eigen::Matrix4d L;
  L << 0, -x, -y, -z,
       x, 0, z, -y,
       y, -z, 0, x,
       z, y, -x, 0;
  if (form == QuatRateForm::AsPrinted) L(1, 2) = -z;
  return L;
}

Eigen::Matrix<double, 4, 3> xi_matrix(const Vec4& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix<double, 4, 3> X;
  X << -x, -y, -z,
        w, -z, y,
        z, w, -x,
       -y, x, w;
  return X;
}

Vec13 state_derivative(const Vec13& x, const Vec4& thrust, const Disturbance& d,
                       const ModelParams& params, QuatRateForm form) {
  if (!x.allFinite() || !thrust.allFinite() || !d.accel.allFinite())
    throw std::invalid_argument("dynamics: non-finite input");
  const QuadState s = QuadState::from_vector(x);
  const Eigen::Matrix4d W = params.mixer();
  const Vec4 wrench = W * thrust;
  const Vec3 body_force(0.0, 0.0, wrench[0]);
  const Vec3 tau = wrench.tail<3>();
  const Vec3 J = params.inertia;

  Vec13 dx;
  dx.segment<3>(0) = s.v;
  dx.segment<3>(3) = Vec3(0, 0, -params.gravity) + rotate(s.q, body_force) / params.mass + d.accel;
  dx.segment<4>(6) = 0.5 * lambda_matrix(s.omega, form) * s.q;
  const Vec3 Jw = J.cwiseProduct(s.omega);
  dx.segment<3>(10) = (tau - s.omega.cross(Jw)).cwiseQuotient(J);
  return dx;
}

Vec13 rk4_step(const Vec13& x, const Vec4& thrust, const Disturbance& d, double dt,
               const ModelParams& params, bool renormalize, QuatRateForm form) {
  if (!(dt > 0.0) || dt > 0.05) throw std::invalid_argument("rk4: dt must be in (0, 0.05]");
  const Vec13 k1 = state_derivative(x, thrust, d, params, form);
  const Vec13 k2 = state_derivative(x + 0.5 * dt * k1, thrust, d, params, form);
  const Vec13 k3 = state_derivative(x + 0.5 * dt * k2, thrust, d, params, form);
  const Vec13 k4 = state_derivative(x + dt * k3, thrust, d, params, form);
  Vec13 next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (renormalize) {
    const double n = next.segment<4>(6).norm();
    if (!(n > 0.0)) throw std::runtime_error("rk4: quaternion collapsed to zero");
    next.segment<4>(6) /= n;
  }
  return next;
}

std::pair<Mat13, Mat13x4> linearize(const Vec13& x, const Vec4& thrust,
                                    const ModelParams& params) {
  if (!x.allFinite() || !thrust.allFinite())
    throw std::invalid_argument("linearize: non-finite input");
  const QuadState s = QuadState::from_vector(x);
  const Eigen::Matrix4d W = params.mixer();
  const Vec4 wrench = W * thrust;
  const double c = wrench[0];
  const Vec3 J = params.inertia;
  const double w = s.q[0];
  const Vec3 u = s.q.tail<3>();
  const Vec3 ez(0, 0, 1);

  Mat13 A = Mat13::Zero();
  A.block<3, 3>(0, 3).setIdentity();

  // d(R(q) c ez)/dq in ambient quaternion coordinates
  Eigen::Matrix<double, 3, 4> dRv;
  dRv.col(0) = 2.0 * w * ez + 2.0 * u.cross(ez);
  dRv.block<3, 3>(0, 1) = -2.0 * ez * u.transpose() + 2.0 * u * ez.transpose() +
                          2.0 * u.dot(ez) * Eigen::Matrix3d::Identity() - 2.0 * w * skew(ez);
  A.block<3, 4>(3, 6) = (c / params.mass) * dRv;

  A.block<4, 4>(6, 6) = 0.5 * lambda_matrix(s.omega);
  A.block<4, 3>(6, 10) = 0.5 * xi_matrix(s.q);

  const Eigen::Matrix3d Jm = J.asDiagonal();
  const Eigen::Matrix3d Jinv = J.cwiseInverse().asDiagonal();
  A.block<3, 3>(10, 10) = Jinv * (skew(Jm * s.omega) - skew(s.omega) * Jm);

  Mat13x4 B = Mat13x4::Zero();
  const Vec3 thrust_dir = rotate(s.q, ez) / params.mass;
  B.block<3, 4>(3, 0) = thrust_dir * W.row(0);
  B.block<3, 4>(10, 0) = Jinv * W.block<3, 4>(1, 0);
  return {A, B};
}

Vec4 hover_input(const ModelParams& params) {
  return Vec4::Constant(params.mass * params.gravity / 4.0);
}

}  // namespace qtrack::dyn
