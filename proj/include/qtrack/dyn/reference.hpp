#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace qtrack::dyn {

// One sample of a reference trajectory: full state and rotor thrusts.
struct ReferencePoint {
  double t = 0.0;
  Eigen::VectorXd x;   // 13-dim state
  Eigen::Vector4d u;   // per-rotor thrusts (N)
};

struct ReferenceTrajectory {
  std::vector<ReferencePoint> points;
  double dt = 0.0;

  bool empty() const { return points.empty(); }
  double duration() const { return points.empty() ? 0.0 : points.back().t; }

  size_t index_at(double t) const {
    if (points.empty() || dt <= 0.0) return 0;
    const double rel = (t - points.front().t) / dt;
    const auto idx = static_cast<long>(std::floor(rel + 1e-9));
    return static_cast<size_t>(std::clamp<long>(idx, 0, static_cast<long>(points.size()) - 1));
  }

  const ReferencePoint& at_time(double t) const { return points[index_at(t)]; }

  // Reference position linearly interpolated between samples, clamped at
  // both ends.
  Eigen::Vector3d position_at(double t) const {
    if (points.empty()) return Eigen::Vector3d::Zero();
    if (dt <= 0.0 || points.size() == 1) return points.front().x.head<3>();
    const double rel = std::clamp((t - points.front().t) / dt, 0.0,
                                  static_cast<double>(points.size() - 1));
    const size_t i = std::min(static_cast<size_t>(std::floor(rel)), points.size() - 2);
    const double f = rel - static_cast<double>(i);
    const Eigen::Vector3d p0 = points[i].x.head<3>();
    const Eigen::Vector3d p1 = points[i + 1].x.head<3>();
    return (1.0 - f) * p0 + f * p1;
  }

  // Window of n points starting at time t; the final point repeats past the end.
  std::vector<ReferencePoint> window(double t, int n) const {
    std::vector<ReferencePoint> out;
    out.reserve(static_cast<size_t>(n));
    size_t i = index_at(t);
    for (int k = 0; k < n; ++k) {
      const size_t idx = std::min(i + static_cast<size_t>(k), points.size() - 1);
      out.push_back(points[idx]);
    }
    return out;
  }
};

}  // namespace qtrack::dyn
