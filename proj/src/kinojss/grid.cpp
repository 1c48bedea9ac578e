#include "qtrack/kinojss/grid.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace qtrack::kinojss {

OccupancyGrid::OccupancyGrid(const Eigen::Vector3i& dims, double resolution)
    : dims_(dims), resolution_(resolution) {
  if (dims.minCoeff() <= 0) throw std::invalid_argument("grid: dimensions must be positive");
  if (resolution <= 0.0) throw std::invalid_argument("grid: resolution must be positive");
  cells_.assign(static_cast<size_t>(dims.x()) * dims.y() * dims.z(), 0);
}

size_t OccupancyGrid::index(const Eigen::Vector3i& c) const {
  return static_cast<size_t>((c.z() * dims_.y() + c.y()) * dims_.x() + c.x());
}

bool OccupancyGrid::inside(const Eigen::Vector3i& c) const {
  return c.x() >= 0 && c.y() >= 0 && c.z() >= 0 && c.x() < dims_.x() && c.y() < dims_.y() &&
         c.z() < dims_.z();
}

bool OccupancyGrid::occupied(const Eigen::Vector3i& c) const {
  if (!inside(c)) return true;
  return cells_[index(c)] != 0;
}

void OccupancyGrid::set_occupied(const Eigen::Vector3i& c, bool value) {
  if (!inside(c)) throw std::out_of_range("grid: cell outside dimensions");
  uint8_t& cell = cells_[index(c)];
  if (cell == 0 && value) ++occupied_count_;
  if (cell != 0 && !value) --occupied_count_;
  cell = value ? 1 : 0;
}

Eigen::Vector3i OccupancyGrid::cell_of(const Eigen::Vector3d& p) const {
  return Eigen::Vector3i(static_cast<int>(std::floor(p.x() / resolution_)),
                         static_cast<int>(std::floor(p.y() / resolution_)),
                         static_cast<int>(std::floor(p.z() / resolution_)));
}

Eigen::Vector3d OccupancyGrid::center_of(const Eigen::Vector3i& c) const {
  return (c.cast<double>() + Eigen::Vector3d::Constant(0.5).eval()) * resolution_;
}

std::string OccupancyGrid::to_json() const {
  nlohmann::json j;
  j["dims"] = {dims_.x(), dims_.y(), dims_.z()};
  j["resolution"] = resolution_;
  nlohmann::json occ = nlohmann::json::array();
  for (int z = 0; z < dims_.z(); ++z) {
    for (int y = 0; y < dims_.y(); ++y) {
      for (int x = 0; x < dims_.x(); ++x) {
        const Eigen::Vector3i c(x, y, z);
        if (occupied(c)) occ.push_back({x, y, z});
      }
    }
  }
  j["occupied"] = std::move(occ);
  return j.dump();
}

OccupancyGrid OccupancyGrid::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  const auto dims = j.at("dims");
  if (!dims.is_array() || dims.size() != 3) throw std::invalid_argument("grid json: dims");
  OccupancyGrid grid(Eigen::Vector3i(dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()),
                     j.at("resolution").get<double>());
  for (const auto& cell : j.at("occupied")) {
    if (!cell.is_array() || cell.size() != 3) throw std::invalid_argument("grid json: cell");
    grid.set_occupied(Eigen::Vector3i(cell[0].get<int>(), cell[1].get<int>(), cell[2].get<int>()));
  }
  return grid;
}

Eigen::Vector3i resolve_goal_cell(const RandomGridConfig& cfg) {
  Eigen::Vector3i goal = cfg.goal;
  for (int k = 0; k < 3; ++k) {
    if (goal[k] < 0) goal[k] = cfg.dims[k] - 2;
  }
  return goal;
}

OccupancyGrid random_grid(const RandomGridConfig& cfg) {
  OccupancyGrid grid(cfg.dims, cfg.resolution);
  const Eigen::Vector3i goal = resolve_goal_cell(cfg);
  if (!grid.inside(cfg.start) || !grid.inside(goal)) {
    throw std::invalid_argument("grid: start or goal outside dimensions");
  }

  std::unordered_set<size_t> protected_cells;
  auto protect = [&](const Eigen::Vector3i& c) {
    const int r = cfg.corridor_clearance;
    for (int dz = -r; dz <= r; ++dz) {
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const Eigen::Vector3i n = c + Eigen::Vector3i(dx, dy, dz);
          if (grid.inside(n)) {
            protected_cells.insert(
                static_cast<size_t>((n.z() * cfg.dims.y() + n.y()) * cfg.dims.x() + n.x()));
          }
        }
      }
    }
  };

  protect(cfg.start);
  protect(goal);
  if (cfg.carve_corridor) {
    Eigen::Vector3i c = cfg.start;
    while (c != goal) {
      for (int k = 0; k < 3; ++k) {
        if (c[k] < goal[k]) {
          ++c[k];
          break;
        }
        if (c[k] > goal[k]) {
          --c[k];
          break;
        }
      }
      protect(c);
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> ux(0, cfg.dims.x() - 1);
  std::uniform_int_distribution<int> uy(0, cfg.dims.y() - 1);
  std::uniform_int_distribution<int> uz(0, cfg.dims.z() - 1);
  int placed = 0;
  int attempts = 0;
  const int max_attempts = cfg.obstacle_count * 50 + 1000;
  while (placed < cfg.obstacle_count && attempts < max_attempts) {
    ++attempts;
    const Eigen::Vector3i c(ux(rng), uy(rng), uz(rng));
    const auto key = static_cast<size_t>((c.z() * cfg.dims.y() + c.y()) * cfg.dims.x() + c.x());
    if (protected_cells.count(key) != 0 || grid.occupied(c)) continue;
    grid.set_occupied(c);
    ++placed;
  }
  return grid;
}

}  // namespace qtrack::kinojss
