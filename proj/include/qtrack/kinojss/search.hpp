#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "qtrack/kinojss/grid.hpp"

namespace qtrack::kinojss {

struct JssConfig {
  double v_max = 5.0;
  double a_max = 5.0;
  double tau = 0.4;
  double goal_tol = 0.5;
  double noise_std = 0.0;        // Gaussian jitter on the disturbance correction
  double correction_sign = 1.0;  // +1 applies the correction as printed
  int max_depth = 64;
  int max_expansions = 100000;
  size_t max_nodes = 2000000;
  double v_quantum = 0.5;  // velocity quantization of the visited-set key
  bool jump = true;        // false degrades to plain kinodynamic best-first search
  bool exhaustion_fallback = true;
  uint64_t seed = 0;

  void validate() const;
};

struct Motion {
  Eigen::Vector3d accel = Eigen::Vector3d::Zero();
  double tau = 0.4;
};

struct SearchState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3i cell = Eigen::Vector3i::Zero();
  double cost = 0.0;
  int parent = -1;
  Motion from_parent;
  std::vector<Eigen::Vector3d> neighbors;  // forced-neighbor target points
};

struct RouteEdge {
  SearchState from;
  Motion motion;
};

struct Route {
  std::vector<RouteEdge> edges;
  SearchState final_state;
  double cost = 0.0;
  bool success = false;
  bool used_fallback = false;
  std::string reason;
  int expansions = 0;
};

// Double-integrator closed form over one primitive.
SearchState state_propagation(const SearchState& state, const Motion& motion);

// True iff the commanded acceleration and the velocity over the whole
// primitive stay inside the configured boxes.
bool check_fea(const SearchState& state, const Motion& motion, const JssConfig& cfg);

// Corrected pyramid primitives toward the goal plus the state's stored
// forced-neighbor motions. The correction shifts every primitive by
// sign * (E_f + noise).
std::vector<Motion> jss_motion(const SearchState& state, const Eigen::Vector3d& goal,
                               const Eigen::Vector3d& e_f, const JssConfig& cfg,
                               std::mt19937_64& rng);

// Free cells ringing the obstacle faces that abut the state's cell.
std::vector<Eigen::Vector3d> jss_neighbor(const OccupancyGrid& grid, const SearchState& state);

// Cells touched by the primitive's swept path, conservatively rasterized.
std::vector<Eigen::Vector3i> swept_cells(const OccupancyGrid& grid, const SearchState& state,
                                         const Motion& motion);

bool near_goal(const SearchState& state, const Eigen::Vector3d& goal, const JssConfig& cfg);

// Admissible per-axis time-optimal double-integrator bound to the goal.
double heuristic(const Eigen::Vector3d& p, const Eigen::Vector3d& v, const Eigen::Vector3d& goal,
                 const JssConfig& cfg);

Route plan(const OccupancyGrid& grid, const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
           const Eigen::Vector3d& e_f, const JssConfig& cfg);

}  // namespace qtrack::kinojss
