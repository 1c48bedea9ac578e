#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace qtrack::kinojss {

// Axis-aligned 3-D occupancy grid. Cell (0,0,0) spans [0, resolution)^3;
// coordinates outside the grid count as occupied.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(const Eigen::Vector3i& dims, double resolution);

  const Eigen::Vector3i& dims() const { return dims_; }
  double resolution() const { return resolution_; }
  size_t occupied_count() const { return occupied_count_; }

  bool inside(const Eigen::Vector3i& c) const;
  bool occupied(const Eigen::Vector3i& c) const;  // outside cells report occupied
  bool free_cell(const Eigen::Vector3i& c) const { return inside(c) && !occupied(c); }
  void set_occupied(const Eigen::Vector3i& c, bool value = true);

  Eigen::Vector3i cell_of(const Eigen::Vector3d& p) const;
  Eigen::Vector3d center_of(const Eigen::Vector3i& c) const;
  bool point_free(const Eigen::Vector3d& p) const { return free_cell(cell_of(p)); }

  std::string to_json() const;
  static OccupancyGrid from_json(const std::string& text);

 private:
  size_t index(const Eigen::Vector3i& c) const;

  Eigen::Vector3i dims_ = Eigen::Vector3i::Zero();
  double resolution_ = 0.2;
  std::vector<uint8_t> cells_;
  size_t occupied_count_ = 0;
};

struct RandomGridConfig {
  Eigen::Vector3i dims{20, 20, 5};
  double resolution = 0.2;
  int obstacle_count = 149;  // preset densities: 499, 249, 149
  uint64_t seed = 1;
  // Cells within this Chebyshev radius of the carved corridor stay free.
  int corridor_clearance = 1;
  bool carve_corridor = true;
  Eigen::Vector3i start{1, 1, 1};
  Eigen::Vector3i goal{-1, -1, -1};  // negative entries resolve to dims-2
};

// Random obstacle field with an optional guaranteed-free monotone corridor
// between start and goal.
OccupancyGrid random_grid(const RandomGridConfig& cfg);

Eigen::Vector3i resolve_goal_cell(const RandomGridConfig& cfg);

}  // namespace qtrack::kinojss
