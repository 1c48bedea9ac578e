#include "qtrack/kinojss/search.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <unordered_set>

namespace qtrack::kinojss {
namespace {

uint64_t pack_key(const Eigen::Vector3i& cell, const Eigen::Vector3d& v, double quantum) {
  auto field = [](int value) { return static_cast<uint64_t>(value + 512) & 0x3FF; };
  uint64_t key = 0;
  for (int k = 0; k < 3; ++k) key = (key << 10) | field(cell[k]);
  for (int k = 0; k < 3; ++k) {
    key = (key << 10) | field(static_cast<int>(std::floor(v[k] / quantum)));
  }
  return key;
}

bool occupied_around(const OccupancyGrid& grid, const Eigen::Vector3i& cell) {
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        if (grid.occupied(cell + Eigen::Vector3i(dx, dy, dz))) return true;
      }
    }
  }
  return false;
}

// Minimal time for one axis of a double integrator to cover the remaining
// distance with bounded acceleration and speed, final velocity free.
double axis_time(double dist, double v, double a_max, double v_max) {
  if (dist < 0.0) {
    dist = -dist;
    v = -v;
  }
  if (dist < 1e-12) return 0.0;
  const double disc = v * v + 2.0 * a_max * dist;
  double t = (-v + std::sqrt(disc)) / a_max;
  const double t_cap = (v_max - v) / a_max;
  if (t > t_cap) {
    const double x_cap = v * t_cap + 0.5 * a_max * t_cap * t_cap;
    t = t_cap + (dist - x_cap) / v_max;
  }
  return t;
}

struct OpenEntry {
  double f = 0.0;
  uint64_t seq = 0;
  int idx = -1;
  bool operator>(const OpenEntry& other) const {
    if (f != other.f) return f > other.f;
    return seq > other.seq;
  }
};

struct Searcher {
  const OccupancyGrid& grid;
  Eigen::Vector3d goal;
  Eigen::Vector3d e_f;
  JssConfig cfg;
  std::mt19937_64 rng;

  std::vector<SearchState> arena;
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<OpenEntry>> open;
  std::unordered_set<uint64_t> visited;
  uint64_t seq = 0;
  int expansions = 0;
  bool out_of_room = false;

  Searcher(const OccupancyGrid& g, const Eigen::Vector3d& goal_in, const Eigen::Vector3d& ef,
           const JssConfig& c)
      : grid(g), goal(goal_in), e_f(ef), cfg(c), rng(c.seed) {}

  uint64_t key_of(const SearchState& s) const { return pack_key(s.cell, s.velocity, cfg.v_quantum); }

  void push_open(int idx) {
    const SearchState& s = arena[static_cast<size_t>(idx)];
    open.push({s.cost + heuristic(s.position, s.velocity, goal, cfg), seq++, idx});
  }

  bool sweep_free(const SearchState& from, const Motion& m) const {
    for (const Eigen::Vector3i& c : swept_cells(grid, from, m)) {
      if (grid.occupied(c)) return false;
    }
    return true;
  }

  void expand(int cur_idx, int depth) {
    if (arena.size() > cfg.max_nodes) {
      out_of_room = true;
      return;
    }
    const std::vector<Motion> motions =
        jss_motion(arena[static_cast<size_t>(cur_idx)], goal, e_f, cfg, rng);
    for (const Motion& m : motions) {
      const SearchState& cur = arena[static_cast<size_t>(cur_idx)];
      if (!check_fea(cur, m, cfg)) continue;
      SearchState pro = state_propagation(cur, m);
      pro.cell = grid.cell_of(pro.position);
      if (!grid.free_cell(pro.cell)) continue;
      if (!sweep_free(cur, m)) continue;
      const uint64_t k = key_of(pro);
      if (visited.count(k) != 0) continue;

      pro.cost = cur.cost + m.tau;
      pro.parent = cur_idx;
      pro.from_parent = m;

      const bool forced = occupied_around(grid, pro.cell);
      const bool stop_jump = forced || near_goal(pro, goal, cfg) || depth >= cfg.max_depth ||
                             !cfg.jump || out_of_room;
      if (forced) pro.neighbors = jss_neighbor(grid, pro);

      arena.push_back(std::move(pro));
      const int idx = static_cast<int>(arena.size()) - 1;
      if (stop_jump) {
        push_open(idx);
      } else {
        visited.insert(k);
        expand(idx, depth + 1);
      }
    }
  }

  Route run(const Eigen::Vector3d& start) {
    Route route;
    SearchState s0;
    s0.position = start;
    s0.cell = grid.cell_of(start);
    arena.push_back(s0);
    push_open(0);

    while (!open.empty()) {
      const OpenEntry top = open.top();
      open.pop();
      const SearchState& cur = arena[static_cast<size_t>(top.idx)];
      const uint64_t k = key_of(cur);
      if (!visited.insert(k).second && top.idx != 0) continue;

      if (near_goal(cur, goal, cfg)) {
        return reconstruct(top.idx);
      }
      if (++expansions > cfg.max_expansions || out_of_room) {
        route.reason = "expansion budget exhausted";
        route.expansions = expansions;
        return route;
      }
      expand(top.idx, 0);
    }
    route.reason = "open set exhausted";
    route.expansions = expansions;
    return route;
  }

  Route reconstruct(int goal_idx) const {
    Route route;
    route.success = true;
    route.expansions = expansions;
    route.final_state = arena[static_cast<size_t>(goal_idx)];
    route.cost = route.final_state.cost;
    std::vector<int> chain;
    for (int idx = goal_idx; idx >= 0; idx = arena[static_cast<size_t>(idx)].parent) {
      chain.push_back(idx);
    }
    std::reverse(chain.begin(), chain.end());
    for (size_t i = 0; i + 1 < chain.size(); ++i) {
      route.edges.push_back({arena[static_cast<size_t>(chain[i])],
                             arena[static_cast<size_t>(chain[i + 1])].from_parent});
    }
    return route;
  }
};

}  // namespace

void JssConfig::validate() const {
  if (v_max <= 0.0 || a_max <= 0.0 || tau <= 0.0 || goal_tol <= 0.0 || v_quantum <= 0.0) {
    throw std::invalid_argument("kinojss: config values must be positive");
  }
  if (noise_std < 0.0 || max_depth < 0 || max_expansions <= 0) {
    throw std::invalid_argument("kinojss: invalid search limits");
  }
}

SearchState state_propagation(const SearchState& state, const Motion& motion) {
  SearchState next;
  const double t = motion.tau;
  next.position = state.position + state.velocity * t + 0.5 * motion.accel * t * t;
  next.velocity = state.velocity + motion.accel * t;
  // The cell index depends on the grid; callers with a grid in scope fill it.
  next.cell.setZero();
  return next;
}

bool check_fea(const SearchState& state, const Motion& motion, const JssConfig& cfg) {
  if (motion.accel.cwiseAbs().maxCoeff() > cfg.a_max + 1e-12) return false;
  const Eigen::Vector3d v_end = state.velocity + motion.accel * motion.tau;
  // Per-axis velocity is linear in time, so the extremes sit at the endpoints.
  if (state.velocity.cwiseAbs().maxCoeff() > cfg.v_max + 1e-12) return false;
  if (v_end.cwiseAbs().maxCoeff() > cfg.v_max + 1e-12) return false;
  return true;
}

std::vector<Motion> jss_motion(const SearchState& state, const Eigen::Vector3d& goal,
                               const Eigen::Vector3d& e_f, const JssConfig& cfg,
                               std::mt19937_64& rng) {
  Eigen::Vector3d correction = e_f;
  if (cfg.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    correction += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
  }
  correction *= cfg.correction_sign;

  Eigen::Vector3d dir = goal - state.position;
  if (dir.norm() < 1e-9) {
    dir = Eigen::Vector3d::UnitX();
  } else {
    dir.normalize();
  }
  Eigen::Vector3d lat1 = dir.cross(Eigen::Vector3d::UnitZ());
  if (lat1.norm() < 1e-6) lat1 = dir.cross(Eigen::Vector3d::UnitX());
  lat1.normalize();
  const Eigen::Vector3d lat2 = dir.cross(lat1).normalized();

  std::vector<Motion> motions;
  motions.reserve(27 + state.neighbors.size());
  const double lat_step = cfg.a_max / 3.0;
  for (int j = 1; j <= 3; ++j) {
    const double mag = cfg.a_max * static_cast<double>(j) / 3.0;
    for (int l1 = -1; l1 <= 1; ++l1) {
      for (int l2 = -1; l2 <= 1; ++l2) {
        Motion m;
        m.tau = cfg.tau;
        m.accel = mag * dir + lat_step * (l1 * lat1 + l2 * lat2) + correction;
        motions.push_back(m);
      }
    }
  }

  // posToMotion: acceleration that lands the primitive on the stored target.
  for (const Eigen::Vector3d& target : state.neighbors) {
    Motion m;
    m.tau = cfg.tau;
    m.accel = 2.0 * (target - state.position - state.velocity * cfg.tau) / (cfg.tau * cfg.tau);
    m.accel = m.accel.cwiseMax(-cfg.a_max).cwiseMin(cfg.a_max);
    if (check_fea(state, m, cfg)) motions.push_back(m);
  }
  return motions;
}

std::vector<Eigen::Vector3d> jss_neighbor(const OccupancyGrid& grid, const SearchState& state) {
  std::vector<Eigen::Vector3d> targets;
  std::unordered_set<uint64_t> seen;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        const Eigen::Vector3i obs = state.cell + Eigen::Vector3i(dx, dy, dz);
        if (!grid.inside(obs) || !grid.occupied(obs)) continue;

        const Eigen::Vector3i dir = state.cell - obs;
        int axis = 0;
        for (int k = 1; k < 3; ++k) {
          if (std::abs(dir[k]) > std::abs(dir[axis])) axis = k;
        }
        const int sign = dir[axis] >= 0 ? 1 : -1;
        Eigen::Vector3i face = obs;
        face[axis] += sign;
        const int u = (axis + 1) % 3;
        const int v = (axis + 2) % 3;
        for (int du = -1; du <= 1; ++du) {
          for (int dv = -1; dv <= 1; ++dv) {
            if (du == 0 && dv == 0) continue;
            Eigen::Vector3i ring = face;
            ring[u] += du;
            ring[v] += dv;
            if (!grid.free_cell(ring)) continue;
            const uint64_t key = pack_key(ring, Eigen::Vector3d::Zero(), 1.0);
            if (seen.insert(key).second) targets.push_back(grid.center_of(ring));
          }
        }
      }
    }
  }
  return targets;
}

std::vector<Eigen::Vector3i> swept_cells(const OccupancyGrid& grid, const SearchState& state,
                                         const Motion& motion) {
  std::vector<Eigen::Vector3i> cells;
  std::unordered_set<uint64_t> seen;
  auto add = [&](const Eigen::Vector3i& c) {
    if (seen.insert(pack_key(c, Eigen::Vector3d::Zero(), 1.0)).second) cells.push_back(c);
  };

  const double t_end = motion.tau;
  const double v_peak = state.velocity.norm() + motion.accel.norm() * t_end;
  const double step_len = 0.1 * grid.resolution();
  const int n_steps = std::max(4, static_cast<int>(std::ceil(v_peak * t_end / step_len)));

  Eigen::Vector3i prev = grid.cell_of(state.position);
  add(prev);
  for (int i = 1; i <= n_steps; ++i) {
    const double t = t_end * static_cast<double>(i) / n_steps;
    const Eigen::Vector3d p = state.position + state.velocity * t + 0.5 * motion.accel * t * t;
    const Eigen::Vector3i cur = grid.cell_of(p);
    if (cur != prev) {
      // Conservative supercover: when the walk crosses several cell faces in
      // one step, include the per-axis intermediate cells as well.
      Eigen::Vector3i mid = prev;
      for (int k = 0; k < 3; ++k) {
        if (mid[k] != cur[k]) {
          mid[k] = cur[k];
          add(mid);
        }
      }
      Eigen::Vector3i mid2 = prev;
      for (int k = 2; k >= 0; --k) {
        if (mid2[k] != cur[k]) {
          mid2[k] = cur[k];
          add(mid2);
        }
      }
      add(cur);
      prev = cur;
    }
  }
  return cells;
}

bool near_goal(const SearchState& state, const Eigen::Vector3d& goal, const JssConfig& cfg) {
  return (state.position - goal).norm() <= cfg.goal_tol;
}

double heuristic(const Eigen::Vector3d& p, const Eigen::Vector3d& v, const Eigen::Vector3d& goal,
                 const JssConfig& cfg) {
  double t = 0.0;
  for (int k = 0; k < 3; ++k) {
    t = std::max(t, axis_time(goal[k] - p[k], v[k], cfg.a_max, cfg.v_max));
  }
  return t;
}

Route plan(const OccupancyGrid& grid, const Eigen::Vector3d& start, const Eigen::Vector3d& goal,
           const Eigen::Vector3d& e_f, const JssConfig& cfg) {
  cfg.validate();
  Route failure;
  if (!grid.point_free(start)) {
    failure.reason = "start cell occupied";
    return failure;
  }
  if (!grid.point_free(goal)) {
    failure.reason = "goal cell occupied";
    return failure;
  }

  Searcher searcher(grid, goal, e_f, cfg);
  Route route = searcher.run(start);
  if (!route.success && cfg.jump && cfg.exhaustion_fallback) {
    JssConfig plain = cfg;
    plain.jump = false;
    plain.exhaustion_fallback = false;
    Searcher fallback(grid, goal, e_f, plain);
    route = fallback.run(start);
    route.used_fallback = true;
  }

  if (route.success) {
    // Route invariants are hard guarantees: re-check connectivity,
    // feasibility, and the swept corridor.
    SearchState cursor = route.edges.empty() ? route.final_state : route.edges.front().from;
    for (const RouteEdge& edge : route.edges) {
      if ((edge.from.position - cursor.position).norm() > 1e-9) {
        throw std::logic_error("kinojss: route chain broken");
      }
      if (!check_fea(edge.from, edge.motion, cfg)) {
        throw std::logic_error("kinojss: infeasible route edge");
      }
      for (const Eigen::Vector3i& c : swept_cells(grid, edge.from, edge.motion)) {
        if (grid.occupied(c)) throw std::logic_error("kinojss: route sweeps occupied cell");
      }
      SearchState stepped = state_propagation(edge.from, edge.motion);
      cursor.position = stepped.position;
      cursor.velocity = stepped.velocity;
    }
    if ((cursor.position - route.final_state.position).norm() > 1e-9) {
      throw std::logic_error("kinojss: route does not reach its final state");
    }
  }
  return route;
}

}  // namespace qtrack::kinojss
