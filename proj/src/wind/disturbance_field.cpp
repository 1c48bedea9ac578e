#include "qtrack/wind/disturbance_field.hpp"

#include <algorithm>
#include <stdexcept>

#include "qtrack/dyn/quad_model.hpp"

namespace qtrack::wind {

static constexpr double kHorizontalCap = 3.5;

void ForceZone::validate() const {
  if ((hi - lo).minCoeff() <= 0.0) throw std::invalid_argument("zone: box must have positive extent");
  if (ramp < 0.0) throw std::invalid_argument("zone: ramp must be non-negative");
  if (force.norm() > kHorizontalCap)
    throw std::invalid_argument("zone: force magnitude outside the supported range");
}

double ForceZone::weight_at(const Vec3& p) const {
  double depth = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    depth = std::min({depth, p[i] - lo[i], hi[i] - p[i]});
  if (depth <= 0.0) return 0.0;
  if (ramp == 0.0) return 1.0;
  return std::min(depth / ramp, 1.0);
}

Vec3 DisturbanceField::zone_sum_at(const Vec3& p) const {
  Vec3 a = Vec3::Zero();
  for (const auto& z : zones) a += z.weight_at(p) * z.force;
  return a;
}

void DisturbanceField::validate() const {
  for (const auto& z : zones) z.validate();
  if (noise_std < 0.0 || estimator_std < 0.0 || estimator_bound < 0.0)
    throw std::invalid_argument("field: noise parameters must be non-negative");
}

Vec3 true_force(const DisturbanceField& field, const Vec3& p, double /*t*/,
                std::mt19937_64& rng) {
  Vec3 f = field.zone_sum_at(p);
  if (field.noise_std > 0.0) {
    std::normal_distribution<double> dist(0.0, field.noise_std);
    for (int i = 0; i < 3; ++i) f[i] += dist(rng);
  }
  f.x() = std::clamp(f.x(), -kHorizontalCap, kHorizontalCap);
  f.y() = std::clamp(f.y(), -kHorizontalCap, kHorizontalCap);
  return f;
}

static Vec3 truncated_noise(double std_dev, double bound, std::mt19937_64& rng) {
  Vec3 noise = Vec3::Zero();
  if (std_dev <= 0.0 || bound <= 0.0) return noise;
  std::normal_distribution<double> dist(0.0, std_dev);
  for (int i = 0; i < 3; ++i) {
    double n = dist(rng);
    for (int tries = 0; tries < 16 && std::abs(n) > bound; ++tries) n = dist(rng);
    noise[i] = std::clamp(n, -bound, bound);
  }
  return noise;
}

WindEstimate estimated_force(const DisturbanceField& field, const Vec3& e_f_true, double t,
                             std::mt19937_64& rng) {
  return {e_f_true + truncated_noise(field.estimator_std, field.estimator_bound, rng), t};
}

DisturbanceEstimator::DisturbanceEstimator(const DisturbanceField& field, std::uint64_t seed,
                                           bool latency)
    : field_(field), rng_(seed), latency_(latency) {
  field_.validate();
}

WindEstimate DisturbanceEstimator::estimate(const Vec3& p, double t) {
  const Vec3 now = field_.zone_sum_at(p);
  const Vec3 base = (latency_ && has_prev_) ? prev_true_ : now;
  prev_true_ = now;
  has_prev_ = true;
  return estimated_force(field_, base, t, rng_);
}

void DisturbanceEstimator::reset(std::uint64_t seed) {
  rng_.seed(seed);
  has_prev_ = false;
  prev_true_ = Vec3::Zero();
}

Vec3 direction_indicator(const Vec3& accel, const Eigen::Vector4d& q, Frame frame) {
  const double n = accel.norm();
  if (n < 1e-9) return Vec3::Zero();
  Vec3 dir = accel / n;
  if (frame == Frame::Body) {
    Eigen::Vector4d qc = q;
    qc.tail<3>() *= -1.0;
    dir = dyn::rotate(qc, dir);
  }
  return dir;
}

}  // namespace qtrack::wind
