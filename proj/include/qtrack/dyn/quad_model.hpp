#pragma once

#include <Eigen/Dense>
#include <utility>

namespace qtrack::dyn {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec13 = Eigen::Matrix<double, 13, 1>;
using Mat13 = Eigen::Matrix<double, 13, 13>;
using Mat13x4 = Eigen::Matrix<double, 13, 4>;

struct ModelParams {
  double mass = 1.0;
  Vec3 inertia{0.01, 0.01, 0.02};
  double gravity = 9.81;
  double arm = 0.17;
  double torque_coeff = 0.016;
  double thrust_max = 10.0;

  /* Maps the four rotor thrusts to collective thrust and body torques,
   * rotors on +x/+y/-x/-y arms with alternating spin. */
  Eigen::Matrix4d mixer() const;
  void validate() const;
};

/* State layout: position(3), world velocity(3), attitude quaternion wxyz(4),
 * body rates(3). Kept as one flat vector so controllers and metric code can
 * treat it uniformly. */
struct QuadState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec4 q{1.0, 0.0, 0.0, 0.0};
  Vec3 omega = Vec3::Zero();

  static constexpr int kDim = 13;

  Vec13 to_vector() const;
  static QuadState from_vector(const Vec13& x);
  void normalize_quat();
};

struct Disturbance {
  Vec3 accel = Vec3::Zero();  // world-frame acceleration offset
};

enum class QuatRateForm {
  Skew,      // norm-preserving quaternion kinematics
  AsPrinted  // variant with the (1,2)/(2,1) entries both negative
};

Eigen::Matrix3d skew(const Vec3& a);

/* Rotation of v by quaternion q without assuming unit norm, so derivatives
 * can be taken in the ambient 4d coordinates. */
Vec3 rotate(const Vec4& q, const Vec3& v);

/* 4x4 matrix L(w) with qdot = 0.5 * L(w) * q. */
Eigen::Matrix4d lambda_matrix(const Vec3& omega, QuatRateForm form = QuatRateForm::Skew);

/* 4x3 matrix X(q) with qdot = 0.5 * X(q) * w, the rate-side factorization. */
Eigen::Matrix<double, 4, 3> xi_matrix(const Vec4& q);

Vec13 state_derivative(const Vec13& x, const Vec4& thrust, const Disturbance& d,
                       const ModelParams& params, QuatRateForm form = QuatRateForm::Skew);

Vec13 rk4_step(const Vec13& x, const Vec4& thrust, const Disturbance& d, double dt,
               const ModelParams& params, bool renormalize = true,
               QuatRateForm form = QuatRateForm::Skew);

/* Jacobians of the state derivative at (x, thrust); the dynamics are affine
 * in thrust, so A already includes the input-dependent attitude coupling. */
std::pair<Mat13, Mat13x4> linearize(const Vec13& x, const Vec4& thrust,
                                    const ModelParams& params);

/* Thrust vector that balances gravity at level attitude. */
Vec4 hover_input(const ModelParams& params);

}  // namespace qtrack::dyn
