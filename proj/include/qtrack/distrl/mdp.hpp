#pragma once

#include <cstdint>
#include <vector>

#include "qtrack/distrl/distribution.hpp"

namespace qtrack::distrl {

/* Tabular MDP: dense transition kernel, deterministic reward per (s, a). */
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.99;
  std::vector<double> reward;      // [s * n_actions + a]
  std::vector<double> transition;  // [(s * n_actions + a) * n_states + s2]

  double r(int s, int a) const { return reward[s * n_actions + a]; }
  double p(int s, int a, int s2) const {
    return transition[(s * n_actions + a) * n_states + s2];
  }
  void validate() const;
};

TabularMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed,
                      bool deterministic_transitions = false);

/* One quantile-form return distribution per (s, a). */
struct ReturnTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<QuantileDist> z;  // [s * n_actions + a]

  QuantileDist& at(int s, int a) { return z[s * n_actions + a]; }
  const QuantileDist& at(int s, int a) const { return z[s * n_actions + a]; }
  static ReturnTable zeros(const TabularMdp& mdp, int n_atoms);
  Eigen::MatrixXd means() const;  // n_states x n_actions
};

/* Exact backup output before re-projection: one discrete mixture per (s, a). */
using DistTable = std::vector<DiscreteDist>;

/* Largest per-(s,a) distance between two tables; order <= 0 is the
 * infinity-order metric. */
double dbar(const ReturnTable& a, const ReturnTable& b, double order);

/* Greedy action per state from distribution means; ties pick the lowest
 * action index. */
std::vector<int> greedy_policy(const ReturnTable& z);
std::vector<int> greedy_from_q(const Eigen::MatrixXd& q);

/* Pushforward r + gamma * Z(s', a') mixed over successors; exact output,
 * atom counts grow and the caller re-projects. */
DistTable bellman_policy_op(const TabularMdp& mdp, const std::vector<int>& policy,
                            const ReturnTable& z);
DistTable bellman_optimality_op(const TabularMdp& mdp, const ReturnTable& z);

ReturnTable project_table(const DistTable& t, int n_states, int n_actions, int n_atoms);

/* Projected backup: quantile_project composed with the exact operator; an
 * empty policy selects greedy successor actions. */
ReturnTable backup(const TabularMdp& mdp, const ReturnTable& z, const std::vector<int>& policy);

struct FixedPointResult {
  ReturnTable z;
  int iterations = 0;
  bool converged = false;
};

FixedPointResult fixed_point(const TabularMdp& mdp, int n_atoms, const std::vector<int>& policy,
                             double tol, int max_iterations, std::uint64_t init_seed = 0);

/* Classical scalar references. */
Eigen::MatrixXd value_iteration(const TabularMdp& mdp, double tol, int max_iterations);
Eigen::MatrixXd policy_q_exact(const TabularMdp& mdp, const std::vector<int>& policy);

struct PolicyIterationResult {
  std::vector<int> policy;
  Eigen::MatrixXd q;
  int rounds = 0;
  bool converged = false;
};

/* Greedy improvement on exact policy values until the policy fixes. */
PolicyIterationResult policy_improvement_sequence(const TabularMdp& mdp,
                                                  const std::vector<int>& initial, int max_rounds);

}  // namespace qtrack::distrl
