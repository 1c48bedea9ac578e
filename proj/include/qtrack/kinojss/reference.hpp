#pragma once

#include <Eigen/Dense>

#include "qtrack/dyn/quad_model.hpp"
#include "qtrack/dyn/reference.hpp"
#include "qtrack/kinojss/search.hpp"

namespace qtrack::kinojss {

struct ReferenceConfig {
  double dt = 0.05;
  double blend_time = 0.12;     // acceleration ramp at segment joints (s)
  double brake_time_min = 0.4;  // duration floor for the terminal braking arc
  double hover_hold = 1.0;      // hover appended after braking (s)

  void validate() const;
};

// Samples the route's piecewise-constant-acceleration profile, blends the
// acceleration steps, appends a braking arc and terminal hover, and lifts
// the flat outputs to full states and rotor thrusts (yaw held at zero).
dyn::ReferenceTrajectory route_to_reference(const Route& route, const ReferenceConfig& cfg,
                                            const dyn::ModelParams& params);

// Spec-shaped convenience overload with default shaping.
dyn::ReferenceTrajectory route_to_reference(const Route& route, double dt,
                                            const dyn::ModelParams& params);

}  // namespace qtrack::kinojss
