#include "qtrack/distrl/mdp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace qtrack::distrl {

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw std::invalid_argument("mdp: empty state/action space");
  if (!(gamma >= 0.0) || !(gamma < 1.0)) throw std::invalid_argument("mdp: gamma outside [0,1)");
  if (static_cast<int>(reward.size()) != n_states * n_actions)
    throw std::invalid_argument("mdp: reward table size mismatch");
  if (static_cast<int>(transition.size()) != n_states * n_actions * n_states)
    throw std::invalid_argument("mdp: transition table size mismatch");
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      double total = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double pr = p(s, a, s2);
        if (pr < 0.0) throw std::invalid_argument("mdp: negative transition probability");
        total += pr;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("mdp: transition row does not sum to 1");
    }
}

TabularMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed,
                      bool deterministic_transitions) {
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.reward.resize(n_states * n_actions);
  mdp.transition.assign(n_states * n_actions * n_states, 0.0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ur(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> us(0, n_states - 1);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) {
      mdp.reward[s * n_actions + a] = ur(rng);
      double* row = &mdp.transition[(s * n_actions + a) * n_states];
      if (deterministic_transitions) {
        row[us(rng)] = 1.0;
      } else {
        double total = 0.0;
        for (int s2 = 0; s2 < n_states; ++s2) {
          row[s2] = -std::log(1.0 - u01(rng));
          total += row[s2];
        }
        for (int s2 = 0; s2 < n_states; ++s2) row[s2] /= total;
      }
    }
  mdp.validate();
  return mdp;
}

ReturnTable ReturnTable::zeros(const TabularMdp& mdp, int n_atoms) {
  ReturnTable t;
  t.n_states = mdp.n_states;
  t.n_actions = mdp.n_actions;
  t.z.resize(mdp.n_states * mdp.n_actions);
  for (auto& q : t.z) q.atoms = Eigen::VectorXd::Zero(n_atoms);
  return t;
}

Eigen::MatrixXd ReturnTable::means() const {
  Eigen::MatrixXd m(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) m(s, a) = at(s, a).mean();
  return m;
}

double dbar(const ReturnTable& a, const ReturnTable& b, double order) {
  if (a.z.size() != b.z.size()) throw std::invalid_argument("dbar: table size mismatch");
  double worst = 0.0;
  for (size_t i = 0; i < a.z.size(); ++i)
    worst = std::max(worst, wasserstein(a.z[i], b.z[i], order));
  return worst;
}

std::vector<int> greedy_policy(const ReturnTable& z) {
  return greedy_from_q(z.means());
}

std::vector<int> greedy_from_q(const Eigen::MatrixXd& q) {
  std::vector<int> pi(q.rows(), 0);
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    double best = q(s, 0);
    for (Eigen::Index a = 1; a < q.cols(); ++a)
      if (q(s, a) > best) {
        best = q(s, a);
        pi[s] = static_cast<int>(a);
      }
  }
  return pi;
}

static DistTable bellman_with(const TabularMdp& mdp, const std::vector<int>& pi,
                              const ReturnTable& z) {
  if (z.n_states != mdp.n_states || z.n_actions != mdp.n_actions)
    throw std::invalid_argument("bellman: table does not match mdp");
  if (static_cast<int>(pi.size()) != mdp.n_states)
    throw std::invalid_argument("bellman: policy size mismatch");
  for (int a : pi)
    if (a < 0 || a >= mdp.n_actions) throw std::invalid_argument("bellman: action out of range");

  DistTable out(mdp.n_states * mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      DiscreteDist& mix = out[s * mdp.n_actions + a];
      for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        const double pr = mdp.p(s, a, s2);
        if (pr == 0.0) continue;
        const QuantileDist& next = z.at(s2, pi[s2]);
        for (int i = 0; i < next.size(); ++i) {
          mix.values.push_back(mdp.r(s, a) + mdp.gamma * next.atoms[i]);
          mix.probs.push_back(pr / next.size());
        }
      }
      mix.normalize_and_sort();
    }
  return out;
}

DistTable bellman_policy_op(const TabularMdp& mdp, const std::vector<int>& policy,
                            const ReturnTable& z) {
  return bellman_with(mdp, policy, z);
}

DistTable bellman_optimality_op(const TabularMdp& mdp, const ReturnTable& z) {
  return bellman_with(mdp, greedy_policy(z), z);
}

ReturnTable project_table(const DistTable& t, int n_states, int n_actions, int n_atoms) {
  if (static_cast<int>(t.size()) != n_states * n_actions)
    throw std::invalid_argument("project: table size mismatch");
  ReturnTable out;
  out.n_states = n_states;
  out.n_actions = n_actions;
  out.z.resize(t.size());
  for (size_t i = 0; i < t.size(); ++i) out.z[i] = quantile_project(t[i], n_atoms);
  return out;
}

ReturnTable backup(const TabularMdp& mdp, const ReturnTable& z, const std::vector<int>& policy) {
  const int n_atoms = z.z.front().size();
  const DistTable exact = policy.empty() ? bellman_optimality_op(mdp, z)
                                         : bellman_policy_op(mdp, policy, z);
  return project_table(exact, mdp.n_states, mdp.n_actions, n_atoms);
}

FixedPointResult fixed_point(const TabularMdp& mdp, int n_atoms, const std::vector<int>& policy,
                             double tol, int max_iterations, std::uint64_t init_seed) {
  FixedPointResult res;
  res.z = ReturnTable::zeros(mdp, n_atoms);
  if (init_seed != 0) {
    std::mt19937_64 rng(init_seed);
    std::uniform_real_distribution<double> ur(-5.0, 5.0);
    for (auto& q : res.z.z) {
      for (int i = 0; i < q.size(); ++i) q.atoms[i] = ur(rng);
      std::sort(q.atoms.data(), q.atoms.data() + q.size());
    }
  }
  for (res.iterations = 0; res.iterations < max_iterations;) {
    ReturnTable next = backup(mdp, res.z, policy);
    ++res.iterations;
    const double gap = dbar(next, res.z, 0.0);
    res.z = std::move(next);
    if (gap < tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

Eigen::MatrixXd value_iteration(const TabularMdp& mdp, double tol, int max_iterations) {
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::MatrixXd next(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
      for (int a = 0; a < mdp.n_actions; ++a) {
        double acc = mdp.r(s, a);
        for (int s2 = 0; s2 < mdp.n_states; ++s2)
          acc += mdp.gamma * mdp.p(s, a, s2) * q.row(s2).maxCoeff();
        next(s, a) = acc;
      }
    const double gap = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (gap < tol) break;
  }
  return q;
}

Eigen::MatrixXd policy_q_exact(const TabularMdp& mdp, const std::vector<int>& policy) {
  const int n = mdp.n_states * mdp.n_actions;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r(n);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int row = s * mdp.n_actions + a;
      r[row] = mdp.r(s, a);
      for (int s2 = 0; s2 < mdp.n_states; ++s2)
        A(row, s2 * mdp.n_actions + policy[s2]) -= mdp.gamma * mdp.p(s, a, s2);
    }
  const Eigen::VectorXd qflat = A.partialPivLu().solve(r);
  Eigen::MatrixXd q(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a) q(s, a) = qflat[s * mdp.n_actions + a];
  return q;
}

PolicyIterationResult policy_improvement_sequence(const TabularMdp& mdp,
                                                  const std::vector<int>& initial,
                                                  int max_rounds) {
  PolicyIterationResult res;
  res.policy = initial;
  res.q = policy_q_exact(mdp, res.policy);
  for (res.rounds = 0; res.rounds < max_rounds; ++res.rounds) {
    const std::vector<int> improved = greedy_from_q(res.q);
    if (improved == res.policy) {
      res.converged = true;
      break;
    }
    res.policy = improved;
    res.q = policy_q_exact(mdp, res.policy);
  }
  return res;
}

}  // namespace qtrack::distrl
