#include "qtrack/kinojss/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qtrack::kinojss {
namespace {

struct AccelSegment {
  double t0 = 0.0;
  double t1 = 0.0;
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();
};

// Piecewise-constant profile with linear crossfades of width `blend`
// centered on the interior joints. Outside every blend window the value is
// the segment's own acceleration.
Eigen::Vector3d profile_accel(const std::vector<AccelSegment>& segs, double blend, double t) {
  if (segs.empty()) return Eigen::Vector3d::Zero();
  size_t i = 0;
  while (i + 1 < segs.size() && t >= segs[i].t1) ++i;
  const Eigen::Vector3d& a = segs[i].accel;
  const double half = 0.5 * blend;
  if (half <= 0.0) return a;

  if (i > 0 && t < segs[i].t0 + half) {
    const double s = (t - (segs[i].t0 - half)) / blend;
    return (1.0 - s) * segs[i - 1].accel + s * a;
  }
  if (i + 1 < segs.size() && t > segs[i].t1 - half) {
    const double s = (t - (segs[i].t1 - half)) / blend;
    return (1.0 - s) * a + s * segs[i + 1].accel;
  }
  return a;
}

Eigen::Vector4d attitude_from_accel(const Eigen::Vector3d& accel, double gravity,
                                    const Eigen::Vector4d& prev_q) {
  const Eigen::Vector3d f = accel + Eigen::Vector3d(0.0, 0.0, gravity);
  if (f.norm() < 1e-6) return prev_q;
  const Eigen::Vector3d zb = f.normalized();
  Eigen::Vector3d yb = zb.cross(Eigen::Vector3d::UnitX());
  if (yb.norm() < 1e-6) yb = zb.cross(Eigen::Vector3d::UnitY());
  yb.normalize();
  const Eigen::Vector3d xb = yb.cross(zb).normalized();
  Eigen::Matrix3d r;
  r.col(0) = xb;
  r.col(1) = yb;
  r.col(2) = zb;
  const Eigen::Quaterniond quat(r);
  Eigen::Vector4d q(quat.w(), quat.x(), quat.y(), quat.z());
  if (q.dot(prev_q) < 0.0) q = -q;
  return q;
}

// Quaternion product restricted to what the rate extraction needs:
// vector part of conj(q) * qdot.
Eigen::Vector3d rate_from_qdot(const Eigen::Vector4d& q, const Eigen::Vector4d& qdot) {
  const double w = q[0];
  const Eigen::Vector3d u(-q[1], -q[2], -q[3]);
  const double dw = qdot[0];
  const Eigen::Vector3d dv(qdot[1], qdot[2], qdot[3]);
  return 2.0 * (w * dv + dw * u + u.cross(dv));
}

}  // namespace

void ReferenceConfig::validate() const {
  if (dt <= 0.0) throw std::invalid_argument("reference: dt must be positive");
  if (blend_time < 0.0 || brake_time_min <= 0.0 || hover_hold < 0.0) {
    throw std::invalid_argument("reference: invalid shaping durations");
  }
}

dyn::ReferenceTrajectory route_to_reference(const Route& route, const ReferenceConfig& cfg,
                                            const dyn::ModelParams& params) {
  cfg.validate();
  params.validate();
  if (!route.success) {
    throw std::invalid_argument("reference: route missing or failed");
  }

  const Eigen::Vector3d start_pos =
      route.edges.empty() ? route.final_state.position : route.edges.front().from.position;

  // Assemble the acceleration timeline: lead-in hover, route primitives, a
  // braking arc to rest, then the terminal hover hold.
  double min_len = cfg.brake_time_min;
  for (const RouteEdge& e : route.edges) min_len = std::min(min_len, e.motion.tau);
  const double blend = std::min(cfg.blend_time, 0.8 * min_len);
  const double lead_in = std::max(blend, cfg.dt);

  std::vector<AccelSegment> segs;
  double t_cursor = 0.0;
  segs.push_back({t_cursor, t_cursor + lead_in, Eigen::Vector3d::Zero()});
  t_cursor += lead_in;
  for (const RouteEdge& e : route.edges) {
    segs.push_back({t_cursor, t_cursor + e.motion.tau, e.motion.accel});
    t_cursor += e.motion.tau;
  }
  const Eigen::Vector3d v_end = route.final_state.velocity;
  if (v_end.norm() > 1e-9) {
    const double t_brake = std::max(cfg.brake_time_min, v_end.cwiseAbs().maxCoeff() / 4.0);
    segs.push_back({t_cursor, t_cursor + t_brake, -v_end / t_brake});
    t_cursor += t_brake;
  }
  segs.push_back({t_cursor, t_cursor + std::max(cfg.hover_hold, cfg.dt), Eigen::Vector3d::Zero()});
  t_cursor += std::max(cfg.hover_hold, cfg.dt);

  const auto n_points = static_cast<size_t>(std::floor(t_cursor / cfg.dt)) + 1;

  // Flat outputs: integrate the blended acceleration on a fine grid, exact
  // for the piecewise-linear profile between samples.
  const int oversample = std::max(1, static_cast<int>(std::ceil(cfg.dt / 0.002)));
  const double h = cfg.dt / oversample;
  Eigen::Vector3d p = start_pos;
  Eigen::Vector3d v = Eigen::Vector3d::Zero();

  std::vector<Eigen::Vector3d> ps(n_points), vs(n_points), as(n_points);
  std::vector<Eigen::Vector4d> qs(n_points);
  Eigen::Vector4d prev_q(1.0, 0.0, 0.0, 0.0);
  for (size_t j = 0; j < n_points; ++j) {
    const double t_j = static_cast<double>(j) * cfg.dt;
    ps[j] = p;
    vs[j] = v;
    as[j] = profile_accel(segs, blend, t_j);
    qs[j] = attitude_from_accel(as[j], params.gravity, prev_q);
    prev_q = qs[j];

    for (int k = 0; k < oversample; ++k) {
      const double ta = t_j + h * k;
      const Eigen::Vector3d a0 = profile_accel(segs, blend, ta);
      const Eigen::Vector3d a1 = profile_accel(segs, blend, ta + h);
      p += v * h + (h * h / 6.0) * (2.0 * a0 + a1);
      v += 0.5 * h * (a0 + a1);
    }
  }

  // Body rates and torques from quaternion finite differences.
  std::vector<Eigen::Vector3d> omegas(n_points);
  for (size_t j = 0; j < n_points; ++j) {
    Eigen::Vector4d qdot;
    if (j == 0) {
      qdot = (qs[1] - qs[0]) / cfg.dt;
    } else if (j + 1 == n_points) {
      qdot = (qs[j] - qs[j - 1]) / cfg.dt;
    } else {
      qdot = (qs[j + 1] - qs[j - 1]) / (2.0 * cfg.dt);
    }
    omegas[j] = rate_from_qdot(qs[j], qdot);
  }

  const Eigen::Matrix4d w_inv = params.mixer().inverse();
  const Eigen::Matrix3d jm = params.inertia.asDiagonal();
  dyn::ReferenceTrajectory traj;
  traj.dt = cfg.dt;
  traj.points.resize(n_points);
  for (size_t j = 0; j < n_points; ++j) {
    Eigen::Vector3d omega_dot;
    if (j == 0) {
      omega_dot = (omegas[1] - omegas[0]) / cfg.dt;
    } else if (j + 1 == n_points) {
      omega_dot = (omegas[j] - omegas[j - 1]) / cfg.dt;
    } else {
      omega_dot = (omegas[j + 1] - omegas[j - 1]) / (2.0 * cfg.dt);
    }
    const Eigen::Vector3d f = as[j] + Eigen::Vector3d(0.0, 0.0, params.gravity);
    const double thrust_total = params.mass * f.norm();
    const Eigen::Vector3d tau = jm * omega_dot + omegas[j].cross(jm * omegas[j]);

    Eigen::Vector4d wrench;
    wrench << thrust_total, tau;
    const Eigen::Vector4d u =
        (w_inv * wrench).cwiseMax(0.0).cwiseMin(params.thrust_max);

    dyn::ReferencePoint& pt = traj.points[j];
    pt.t = static_cast<double>(j) * cfg.dt;
    Eigen::Matrix<double, 13, 1> x;
    x << ps[j], vs[j], qs[j], omegas[j];
    pt.x = x;
    pt.u = u;
  }
  return traj;
}

dyn::ReferenceTrajectory route_to_reference(const Route& route, double dt,
                                            const dyn::ModelParams& params) {
  ReferenceConfig cfg;
  cfg.dt = dt;
  return route_to_reference(route, cfg, params);
}

}  // namespace qtrack::kinojss
