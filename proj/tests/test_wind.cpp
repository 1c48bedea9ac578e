#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "qtrack/wind/disturbance_field.hpp"

using namespace qtrack;
using wind::Vec3;

namespace {

wind::ForceZone box_zone(const Vec3& lo, const Vec3& hi, const Vec3& force, double ramp) {
  wind::ForceZone z;
  z.lo = lo;
  z.hi = hi;
  z.force = force;
  z.ramp = ramp;
  return z;
}

}  // namespace

TEST_CASE("field is zero outside every zone") {
  wind::DisturbanceField field;
  field.zones.push_back(box_zone({0, 0, 0}, {1, 1, 1}, {0, 2.0, 0}, 0.2));
  std::mt19937_64 rng(1);
  CHECK(wind::true_force(field, Vec3(5, 5, 5), 0.0, rng).norm() == 0.0);
  CHECK(wind::true_force(field, Vec3(-0.01, 0.5, 0.5), 0.0, rng).norm() == 0.0);
}

TEST_CASE("deep inside a zone the full force applies") {
  wind::DisturbanceField field;
  field.zones.push_back(box_zone({0, 0, 0}, {4, 4, 4}, {0, 0.5, 0}, 0.5));
  std::mt19937_64 rng(1);
  const Vec3 f = wind::true_force(field, Vec3(2, 2, 2), 0.0, rng);
  CHECK((f - Vec3(0, 0.5, 0)).norm() < 1e-12);
}

TEST_CASE("penetration halfway through the ramp gives half the force") {
  wind::DisturbanceField field;
  field.zones.push_back(box_zone({0, 0, 0}, {4, 4, 4}, {0, 2.0, 0}, 0.5));
  std::mt19937_64 rng(1);
  // 0.25 m inside the x face, far from the others: weight 0.25/0.5.
  const Vec3 f = wind::true_force(field, Vec3(0.25, 2, 2), 0.0, rng);
  CHECK((f - Vec3(0, 1.0, 0)).norm() < 1e-12);
}

TEST_CASE("overlapping zones add their forces") {
  wind::DisturbanceField field;
  field.zones.push_back(box_zone({0, 0, 0}, {4, 4, 4}, {0, 1.0, 0}, 0.1));
  field.zones.push_back(box_zone({1, 1, 1}, {3, 3, 3}, {0.5, 0, 0}, 0.1));
  std::mt19937_64 rng(1);
  const Vec3 f = wind::true_force(field, Vec3(2, 2, 2), 0.0, rng);
  CHECK((f - Vec3(0.5, 1.0, 0)).norm() < 1e-12);
}

TEST_CASE("horizontal force components are capped") {
  wind::DisturbanceField field;
  field.zones.push_back(box_zone({0, 0, 0}, {4, 4, 4}, {3.4, 0, 0}, 0.1));
  field.noise_std = 2.0;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 f = wind::true_force(field, Vec3(2, 2, 2), 0.0, rng);
    CHECK(std::abs(f.x()) <= 3.5);
    CHECK(std::abs(f.y()) <= 3.5);
  }
}

TEST_CASE("identical seeds reproduce the force sequence exactly") {
  wind::DisturbanceField field;
  field.zones.push_back(box_zone({0, 0, 0}, {4, 4, 4}, {0, 1.5, 0}, 0.3));
  field.noise_std = 0.4;
  std::mt19937_64 rng_a(99), rng_b(99);
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(0.1 * i, 2.0, 2.0);
    const Vec3 fa = wind::true_force(field, p, 0.05 * i, rng_a);
    const Vec3 fb = wind::true_force(field, p, 0.05 * i, rng_b);
    CHECK((fa - fb).norm() == 0.0);
  }
}

TEST_CASE("zero estimator noise returns the truth") {
  wind::DisturbanceField field;
  field.estimator_std = 0.0;
  field.estimator_bound = 0.0;
  std::mt19937_64 rng(3);
  const wind::WindEstimate e = wind::estimated_force(field, Vec3(0.7, -1.2, 0.3), 1.5, rng);
  CHECK((e.n_f - Vec3(0.7, -1.2, 0.3)).norm() == 0.0);
  CHECK(e.t == 1.5);
}

TEST_CASE("estimator error never exceeds the per-axis bound") {
  wind::DisturbanceField field;
  std::mt19937_64 rng(5);
  const Vec3 truth(0.0, 2.5, 0.0);
  for (int i = 0; i < 10000; ++i) {
    const wind::WindEstimate e = wind::estimated_force(field, truth, 0.0, rng);
    CHECK((e.n_f - truth).cwiseAbs().maxCoeff() <= 0.5 + 1e-15);
  }
}

TEST_CASE("estimator noise has roughly the configured spread") {
  wind::DisturbanceField field;
  field.estimator_std = 0.2;
  field.estimator_bound = 1.0;  // wide enough that truncation barely bites
  std::mt19937_64 rng(11);
  const Vec3 truth(1.0, 0.0, -0.5);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const wind::WindEstimate e = wind::estimated_force(field, truth, 0.0, rng);
    const double err = e.n_f.x() - truth.x();
    sum += err;
    sumsq += err * err;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(mean) < 0.01);
  CHECK(std == doctest::Approx(0.2).epsilon(0.10));
}

TEST_CASE("stateful estimator lags the field by one query") {
  wind::DisturbanceField field;
  field.zones.push_back(box_zone({0, 0, 0}, {4, 4, 4}, {0, 1.5, 0}, 1e-6));
  field.estimator_std = 0.0;
  field.estimator_bound = 0.0;

  wind::DisturbanceEstimator est(field, 42);
  // The very first query has no history and reports the current sample.
  const wind::WindEstimate e0 = est.estimate(Vec3(2, 2, 2), 0.0);
  CHECK((e0.n_f - Vec3(0, 1.5, 0)).norm() < 1e-12);
  // Afterwards each query reports the previous position's force.
  const wind::WindEstimate e1 = est.estimate(Vec3(5, 5, 5), 0.05);
  CHECK((e1.n_f - Vec3(0, 1.5, 0)).norm() < 1e-12);
  const wind::WindEstimate e2 = est.estimate(Vec3(5, 5, 5), 0.10);
  CHECK(e2.n_f.norm() == 0.0);
}

TEST_CASE("latency-free estimator reports the current position") {
  wind::DisturbanceField field;
  field.zones.push_back(box_zone({0, 0, 0}, {4, 4, 4}, {0, 1.5, 0}, 1e-6));
  field.estimator_std = 0.0;
  field.estimator_bound = 0.0;
  wind::DisturbanceEstimator est(field, 42, false);
  CHECK((est.estimate(Vec3(2, 2, 2), 0.0).n_f - Vec3(0, 1.5, 0)).norm() < 1e-12);
}

TEST_CASE("estimator reset reproduces its stream") {
  wind::DisturbanceField field;
  field.zones.push_back(box_zone({0, 0, 0}, {4, 4, 4}, {1.0, 1.0, 0}, 0.2));
  wind::DisturbanceEstimator est(field, 7);
  std::vector<Vec3> first;
  for (int i = 0; i < 50; ++i) first.push_back(est.estimate(Vec3(2, 2, 2), 0.05 * i).n_f);
  est.reset(7);
  for (int i = 0; i < 50; ++i)
    CHECK((est.estimate(Vec3(2, 2, 2), 0.05 * i).n_f - first[i]).norm() == 0.0);
}

TEST_CASE("direction indicator respects the frame flag") {
  const Vec3 a(0, 2.0, 0);
  Eigen::Vector4d q_id(1, 0, 0, 0);
  CHECK((wind::direction_indicator(a, q_id, wind::Frame::World) - Vec3(0, 1, 0)).norm() < 1e-12);

  // Quarter turn about z: the world y axis is the body x axis.
  const double c = std::cos(M_PI / 4), s = std::sin(M_PI / 4);
  Eigen::Vector4d q_yaw(c, 0, 0, s);
  CHECK((wind::direction_indicator(a, q_yaw, wind::Frame::Body) - Vec3(1, 0, 0)).norm() < 1e-9);

  CHECK(wind::direction_indicator(Vec3::Zero(), q_id, wind::Frame::World).norm() == 0.0);
}

TEST_CASE("degenerate zones and negative bounds are rejected") {
  wind::ForceZone z = box_zone({1, 0, 0}, {0, 1, 1}, {0, 1, 0}, 0.1);
  CHECK_THROWS(z.validate());
  z = box_zone({0, 0, 0}, {1, 1, 1}, {0, 4.0, 0}, 0.1);  // force beyond the cap
  CHECK_THROWS(z.validate());
  wind::DisturbanceField field;
  field.estimator_bound = -0.1;
  CHECK_THROWS(field.validate());
}
