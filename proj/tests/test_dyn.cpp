#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "qtrack/dyn/quad_model.hpp"

using namespace qtrack;
using dyn::Vec3;
using dyn::Vec4;
using dyn::Vec13;

namespace {

dyn::Vec13 random_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  dyn::QuadState s;
  for (int i = 0; i < 3; ++i) {
    s.p[i] = 2.0 * u(rng);
    s.v[i] = 2.0 * u(rng);
    s.omega[i] = 1.5 * u(rng);
  }
  for (int i = 0; i < 4; ++i) s.q[i] = u(rng);
  if (s.q.norm() < 1e-3) s.q << 1, 0, 0, 0;
  s.normalize_quat();
  return s.to_vector();
}

Vec4 random_thrust(std::mt19937_64& rng, const dyn::ModelParams& params) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec4 t;
  for (int i = 0; i < 4; ++i) t[i] = u(rng) * params.thrust_max * 0.6;
  return t;
}

}  // namespace

TEST_CASE("rate matrix vanishes at zero body rate") {
  CHECK(dyn::lambda_matrix(Vec3::Zero()).norm() == 0.0);
  CHECK(dyn::lambda_matrix(Vec3::Zero(), dyn::QuatRateForm::AsPrinted).norm() == 0.0);
}

TEST_CASE("rate matrix puts unit entries in the roll slots") {
  const Eigen::Matrix4d L = dyn::lambda_matrix(Vec3(1, 0, 0));
  CHECK(L(0, 1) == -1.0);
  CHECK(L(1, 0) == 1.0);
  CHECK(L(2, 3) == 1.0);
  CHECK(L(3, 2) == -1.0);
  CHECK(L.diagonal().norm() == 0.0);
  // Entries untouched by the roll rate stay zero.
  CHECK(L(0, 2) == 0.0);
  CHECK(L(1, 2) == 0.0);
  CHECK(L(2, 1) == 0.0);
}

TEST_CASE("skew rate form preserves quaternion norm, the variant form does not") {
  // qdot = 0.5 L(w) q gives d|q|^2/dt = q^T L q, zero only when L is
  // antisymmetric. The variant with both (1,2)/(2,1) entries negative fails
  // whenever the yaw rate and both middle components are nonzero.
  Vec4 q(0.4, 0.5, 0.6, 0.2);
  q.normalize();
  const Vec3 w(0.3, -0.4, 0.8);

  auto qdot_norm_rate = [&](dyn::QuatRateForm form) {
    const Eigen::Matrix4d L = dyn::lambda_matrix(w, form);
    return q.dot(0.5 * L * q);  // d(|q|^2)/dt / 2 scaled; zero iff norm kept
  };
  CHECK(std::abs(qdot_norm_rate(dyn::QuatRateForm::Skew)) < 1e-15);
  CHECK(std::abs(qdot_norm_rate(dyn::QuatRateForm::AsPrinted)) > 1e-3);

  // Same conclusion through one integration step of the full dynamics.
  dyn::ModelParams params;
  dyn::QuadState s;
  s.q = q;
  s.omega = w;
  const Vec4 u = dyn::hover_input(params);
  const Vec13 ok =
      dyn::rk4_step(s.to_vector(), u, {}, 1e-3, params, false, dyn::QuatRateForm::Skew);
  const Vec13 bad =
      dyn::rk4_step(s.to_vector(), u, {}, 1e-3, params, false, dyn::QuatRateForm::AsPrinted);
  CHECK(std::abs(ok.segment<4>(6).squaredNorm() - 1.0) < 1e-6);
  CHECK(std::abs(bad.segment<4>(6).squaredNorm() - 1.0) > 1e-6);
}

TEST_CASE("hover is a fixed point of the state derivative") {
  dyn::ModelParams params;
  dyn::QuadState s;
  const Vec13 dx = dyn::state_derivative(s.to_vector(), dyn::hover_input(params), {}, params);
  CHECK(dx.norm() < 1e-12);
}

TEST_CASE("hover thrust splits the weight across four rotors") {
  dyn::ModelParams params;
  const Vec4 u = dyn::hover_input(params);
  CHECK(u[0] == doctest::Approx(2.4525).epsilon(1e-12));
  CHECK((u.array() == u[0]).all());
}

TEST_CASE("zero thrust gives free fall") {
  dyn::ModelParams params;
  dyn::QuadState s;
  s.v = Vec3(0.3, -0.2, 0.1);
  const Vec13 dx = dyn::state_derivative(s.to_vector(), Vec4::Zero(), {}, params);
  CHECK((dx.segment<3>(3) - Vec3(0, 0, -params.gravity)).norm() < 1e-12);
  CHECK((dx.segment<3>(0) - s.v).norm() == 0.0);
}

TEST_CASE("a lateral force offset appears directly in the acceleration") {
  dyn::ModelParams params;
  dyn::QuadState s;
  dyn::Disturbance d;
  d.accel = Vec3(0.0, 1.5, 0.0);
  const Vec13 dx = dyn::state_derivative(s.to_vector(), dyn::hover_input(params), d, params);
  CHECK((dx.segment<3>(3) - Vec3(0.0, 1.5, 0.0)).norm() < 1e-12);
}

TEST_CASE("non-finite inputs are rejected") {
  dyn::ModelParams params;
  dyn::QuadState s;
  Vec13 x = s.to_vector();
  x[4] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(dyn::state_derivative(x, dyn::hover_input(params), {}, params));
  CHECK_THROWS(dyn::rk4_step(s.to_vector(), Vec4::Constant(1.0), {}, 0.0, params));
  CHECK_THROWS(dyn::rk4_step(s.to_vector(), Vec4::Constant(1.0), {}, 0.06, params));
}

TEST_CASE("integrating hover leaves the state unchanged") {
  dyn::ModelParams params;
  dyn::QuadState s;
  const Vec13 next = dyn::rk4_step(s.to_vector(), dyn::hover_input(params), {}, 0.01, params);
  CHECK((next - s.to_vector()).norm() < 1e-12);
}

TEST_CASE("ballistic flight matches the analytic solution") {
  dyn::ModelParams params;
  dyn::QuadState s;
  Vec13 x = s.to_vector();
  for (int i = 0; i < 1000; ++i) x = dyn::rk4_step(x, Vec4::Zero(), {}, 1e-3, params);
  CHECK(x[5] == doctest::Approx(-params.gravity).epsilon(1e-9));
  CHECK(x[2] == doctest::Approx(-0.5 * params.gravity).epsilon(1e-6));
}

TEST_CASE("halving the step size cuts the global error about sixteenfold") {
  dyn::ModelParams params;
  dyn::QuadState s;
  s.omega = Vec3(0.2, -0.1, 0.3);
  const Vec4 u(3.0, 2.0, 2.5, 2.0);  // asymmetric thrust spins the body up
  const double tf = 0.2;

  auto integrate = [&](double h) {
    Vec13 x = s.to_vector();
    const int n = static_cast<int>(std::round(tf / h));
    for (int i = 0; i < n; ++i) x = dyn::rk4_step(x, u, {}, h, params, false);
    return x;
  };

  const Vec13 ref = integrate(0.02 / 16.0);
  const double e1 = (integrate(0.02) - ref).norm();
  const double e2 = (integrate(0.01) - ref).norm();
  const double ratio = e1 / e2;
  CHECK(ratio > 10.0);
  CHECK(ratio < 24.0);
}

TEST_CASE("quaternion norm stays within drift budgets") {
  dyn::ModelParams params;
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec13 x = random_state(rng);
    const Vec4 u = random_thrust(rng, params);
    const Vec13 raw = dyn::rk4_step(x, u, {}, 1e-3, params, false);
    CHECK(std::abs(raw.segment<4>(6).norm() - 1.0) < 1e-6);
    const Vec13 renorm = dyn::rk4_step(x, u, {}, 1e-3, params, true);
    CHECK(std::abs(renorm.segment<4>(6).norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("jacobians match central differences on random states") {
  dyn::ModelParams params;
  std::mt19937_64 rng(23);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec13 x = random_state(rng);
    const Vec4 u = random_thrust(rng, params);
    const auto [A, B] = dyn::linearize(x, u, params);

    for (int j = 0; j < 13; ++j) {
      Vec13 xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Vec13 col =
          (dyn::state_derivative(xp, u, {}, params) - dyn::state_derivative(xm, u, {}, params)) /
          (2 * h);
      for (int i = 0; i < 13; ++i) {
        const double denom = std::max({1.0, std::abs(col[i]), std::abs(A(i, j))});
        worst = std::max(worst, std::abs(A(i, j) - col[i]) / denom);
      }
    }
    for (int j = 0; j < 4; ++j) {
      Vec4 up = u, um = u;
      up[j] += h;
      um[j] -= h;
      const Vec13 col =
          (dyn::state_derivative(x, up, {}, params) - dyn::state_derivative(x, um, {}, params)) /
          (2 * h);
      for (int i = 0; i < 13; ++i) {
        const double denom = std::max({1.0, std::abs(col[i]), std::abs(B(i, j))});
        worst = std::max(worst, std::abs(B(i, j) - col[i]) / denom);
      }
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("jacobians have the expected hover structure") {
  dyn::ModelParams params;
  dyn::QuadState s;
  const auto [A, B] = dyn::linearize(s.to_vector(), dyn::hover_input(params), params);
  CHECK((A.block<3, 3>(0, 3) - Eigen::Matrix3d::Identity()).norm() == 0.0);
  CHECK(A.block<3, 3>(0, 0).norm() == 0.0);
  for (int i = 0; i < 4; ++i)
    CHECK(B(5, i) == doctest::Approx(1.0 / params.mass).epsilon(1e-12));
}

TEST_CASE("torque-free rotation conserves world angular momentum") {
  dyn::ModelParams params;
  dyn::QuadState s;
  s.omega = Vec3(1.0, -2.0, 1.5);
  const Eigen::Matrix3d J = params.inertia.asDiagonal();

  auto momentum = [&](const Vec13& x) {
    const dyn::QuadState st = dyn::QuadState::from_vector(x);
    return dyn::rotate(st.q, Vec3(J * st.omega));
  };

  Vec13 x = s.to_vector();
  const Vec3 L0 = momentum(x);
  for (int i = 0; i < 10000; ++i) x = dyn::rk4_step(x, Vec4::Zero(), {}, 1e-4, params);
  CHECK((momentum(x) - L0).norm() < 1e-6);
}

TEST_CASE("thrust-to-wrench map is full rank") {
  dyn::ModelParams params;
  Eigen::FullPivLU<Eigen::Matrix4d> lu(params.mixer());
  CHECK(lu.rank() == 4);
}

TEST_CASE("parameter validation rejects non-physical values") {
  dyn::ModelParams params;
  params.mass = 0.0;
  CHECK_THROWS(params.validate());
  params = {};
  params.inertia[1] = -0.01;
  CHECK_THROWS(params.validate());
  params = {};
  CHECK_NOTHROW(params.validate());
}

TEST_CASE("state vector round-trips through the struct") {
  std::mt19937_64 rng(31);
  const Vec13 x = random_state(rng);
  CHECK((dyn::QuadState::from_vector(x).to_vector() - x).norm() == 0.0);
}
