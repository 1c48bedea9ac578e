#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace qtrack::wind {

using Vec3 = Eigen::Vector3d;

/* Axis-aligned box applying a constant world-frame acceleration, faded in
 * linearly over `ramp` meters of penetration so the field is continuous. */
struct ForceZone {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  Vec3 force = Vec3::Zero();
  double ramp = 0.5;

  void validate() const;
  double weight_at(const Vec3& p) const;
};

struct DisturbanceField {
  std::vector<ForceZone> zones;
  double noise_std = 0.0;        // gaussian jitter on the true force
  double estimator_std = 0.2;    // estimator noise scale per axis
  double estimator_bound = 0.5;  // hard cap on estimator error per axis

  Vec3 zone_sum_at(const Vec3& p) const;
  void validate() const;
};

/* Field acceleration at p: ramped zone sum plus jitter, horizontal
 * components capped at the tested force range. */
Vec3 true_force(const DisturbanceField& field, const Vec3& p, double t, std::mt19937_64& rng);

struct WindEstimate {
  Vec3 n_f = Vec3::Zero();
  double t = 0.0;
};

/* Noisy observation of a known true force; per-axis error never exceeds the
 * configured bound. */
WindEstimate estimated_force(const DisturbanceField& field, const Vec3& e_f_true, double t,
                             std::mt19937_64& rng);

/* Stateful wrapper adding one query of latency, standing in for an onboard
 * estimation pipeline that lags the control loop. */
class DisturbanceEstimator {
 public:
  DisturbanceEstimator(const DisturbanceField& field, std::uint64_t seed, bool latency = true);

  WindEstimate estimate(const Vec3& p, double t);
  void reset(std::uint64_t seed);

 private:
  DisturbanceField field_;
  std::mt19937_64 rng_;
  bool latency_;
  bool has_prev_ = false;
  Vec3 prev_true_ = Vec3::Zero();
};

enum class Frame : std::uint8_t { World = 0, Body = 1 };

/* Unit direction of the estimated disturbance, or zero when the estimate is
 * too small to orient by; optionally expressed in the body frame. */
Vec3 direction_indicator(const Vec3& accel, const Eigen::Vector4d& q, Frame frame);

}  // namespace qtrack::wind
