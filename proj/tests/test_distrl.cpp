#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "qtrack/distrl/distribution.hpp"
#include "qtrack/distrl/loss.hpp"
#include "qtrack/distrl/mdp.hpp"

using namespace qtrack;
using distrl::DiscreteDist;
using distrl::QuantileDist;

namespace {

DiscreteDist dist_of(std::initializer_list<double> values, std::initializer_list<double> probs) {
  DiscreteDist d;
  d.values = values;
  d.probs = probs;
  d.normalize_and_sort();
  return d;
}

DiscreteDist random_dist(std::mt19937_64& rng, int max_atoms) {
  std::uniform_int_distribution<int> nd(1, max_atoms);
  std::uniform_real_distribution<double> uv(-3.0, 3.0);
  std::uniform_real_distribution<double> up(0.05, 1.0);
  DiscreteDist d;
  const int n = nd(rng);
  for (int i = 0; i < n; ++i) {
    d.values.push_back(uv(rng));
    d.probs.push_back(up(rng));
  }
  d.normalize_and_sort();
  return d;
}

QuantileDist random_table_entry(std::mt19937_64& rng, int n_atoms) {
  std::uniform_real_distribution<double> uv(-4.0, 4.0);
  QuantileDist q;
  q.atoms.resize(n_atoms);
  for (int i = 0; i < n_atoms; ++i) q.atoms[i] = uv(rng);
  std::sort(q.atoms.data(), q.atoms.data() + n_atoms);
  return q;
}

distrl::ReturnTable random_table(const distrl::TabularMdp& mdp, int n_atoms,
                                 std::mt19937_64& rng) {
  distrl::ReturnTable t = distrl::ReturnTable::zeros(mdp, n_atoms);
  for (auto& q : t.z) q = random_table_entry(rng, n_atoms);
  return t;
}

}  // namespace

TEST_CASE("distance between point masses is their gap") {
  const DiscreteDist d0 = dist_of({0.0}, {1.0});
  const DiscreteDist d1 = dist_of({1.0}, {1.0});
  CHECK(distrl::wasserstein(d0, d1, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(distrl::wasserstein(d0, d1, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(distrl::wasserstein(d0, d1, 0.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("distance from a distribution to itself is zero") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const DiscreteDist d = random_dist(rng, 6);
    CHECK(distrl::wasserstein(d, d, 1.0) == 0.0);
    CHECK(distrl::wasserstein(d, d, 0.0) == 0.0);
  }
}

TEST_CASE("two equal atoms versus their midpoint point mass") {
  const DiscreteDist u = dist_of({0.0, 1.0}, {0.5, 0.5});
  const DiscreteDist mid = dist_of({0.5}, {1.0});
  CHECK(distrl::wasserstein(u, mid, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(distrl::wasserstein(u, mid, 0.0) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("translating a distribution moves it by the shift in every order") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const DiscreteDist d = random_dist(rng, 5);
    DiscreteDist shifted = d;
    for (double& v : shifted.values) v += 0.75;
    for (double order : {1.0, 2.0, 0.0})
      CHECK(distrl::wasserstein(d, shifted, order) == doctest::Approx(0.75).epsilon(1e-12));
  }
}

TEST_CASE("first-order distance agrees with the cdf-area oracle") {
  // W1 equals the absolute area between the two CDFs.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteDist a = random_dist(rng, 6);
    const DiscreteDist b = random_dist(rng, 6);

    std::vector<double> xs;
    xs.insert(xs.end(), a.values.begin(), a.values.end());
    xs.insert(xs.end(), b.values.begin(), b.values.end());
    std::sort(xs.begin(), xs.end());
    auto cdf = [](const DiscreteDist& d, double x) {
      double c = 0.0;
      for (size_t i = 0; i < d.values.size() && d.values[i] <= x; ++i) c += d.probs[i];
      return c;
    };
    double area = 0.0;
    for (size_t i = 0; i + 1 < xs.size(); ++i)
      area += std::abs(cdf(a, xs[i]) - cdf(b, xs[i])) * (xs[i + 1] - xs[i]);
    CHECK(distrl::wasserstein(a, b, 1.0) == doctest::Approx(area).epsilon(1e-10));
  }
}

TEST_CASE("unnormalized inputs are rejected") {
  DiscreteDist bad;
  bad.values = {0.0, 1.0};
  bad.probs = {0.4, 0.4};
  const DiscreteDist ok = dist_of({0.0}, {1.0});
  CHECK_THROWS(distrl::wasserstein(bad, ok, 1.0));
  CHECK_THROWS(distrl::wasserstein(ok, bad, 1.0));
}

TEST_CASE("table distance is the worst entry distance") {
  distrl::TabularMdp mdp = distrl::random_mdp(3, 2, 0.9, 5);
  std::mt19937_64 rng(6);
  distrl::ReturnTable a = random_table(mdp, 4, rng);

  SUBCASE("identical tables are at distance zero") {
    CHECK(distrl::dbar(a, a, 1.0) == 0.0);
    CHECK(distrl::dbar(a, a, 0.0) == 0.0);
  }

  SUBCASE("a single shifted entry sets the distance") {
    distrl::ReturnTable b = a;
    b.at(1, 0).atoms.array() += 2.5;
    for (double order : {1.0, 2.0, 0.0})
      CHECK(distrl::dbar(a, b, order) == doctest::Approx(2.5).epsilon(1e-12));
  }

  SUBCASE("matches an exhaustive scan over entries") {
    distrl::ReturnTable b = random_table(mdp, 4, rng);
    double worst = 0.0;
    for (int s = 0; s < 3; ++s)
      for (int act = 0; act < 2; ++act)
        worst = std::max(worst, distrl::wasserstein(a.at(s, act), b.at(s, act), 1.0));
    CHECK(distrl::dbar(a, b, 1.0) == doctest::Approx(worst).epsilon(1e-14));
  }
}

TEST_CASE("one-atom compression lands on the median") {
  const DiscreteDist d = dist_of({-2.0, 0.5, 4.0}, {0.3, 0.4, 0.3});
  const QuantileDist q = distrl::quantile_project(d, 1);
  REQUIRE(q.size() == 1);
  CHECK(q.atoms[0] == 0.5);
}

TEST_CASE("two equal atoms survive two-atom compression") {
  const DiscreteDist d = dist_of({0.0, 1.0}, {0.5, 0.5});
  const QuantileDist q = distrl::quantile_project(d, 2);
  CHECK(q.atoms[0] == 0.0);
  CHECK(q.atoms[1] == 1.0);
}

TEST_CASE("a distribution already in n-atom form is a fixed point") {
  std::mt19937_64 rng(7);
  for (int n : {1, 2, 4, 8}) {
    QuantileDist q = random_table_entry(rng, n);
    const QuantileDist back = distrl::quantile_project(q.to_discrete(), n);
    CHECK((back.atoms - q.atoms).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("compression is optimal against a grid search") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const DiscreteDist d = random_dist(rng, 5);
    for (int n : {1, 2}) {
      const QuantileDist proj = distrl::quantile_project(d, n);
      const double w_proj = distrl::wasserstein(proj.to_discrete(), d, 1.0);

      const double lo = d.values.front() - 0.5, hi = d.values.back() + 0.5;
      const int steps = 60;
      QuantileDist cand;
      cand.atoms.resize(n);
      double best = std::numeric_limits<double>::infinity();
      if (n == 1) {
        for (int i = 0; i <= steps; ++i) {
          cand.atoms[0] = lo + (hi - lo) * i / steps;
          best = std::min(best, distrl::wasserstein(cand.to_discrete(), d, 1.0));
        }
      } else {
        for (int i = 0; i <= steps; ++i)
          for (int j = i; j <= steps; ++j) {
            cand.atoms[0] = lo + (hi - lo) * i / steps;
            cand.atoms[1] = lo + (hi - lo) * j / steps;
            best = std::min(best, distrl::wasserstein(cand.to_discrete(), d, 1.0));
          }
      }
      CHECK(w_proj <= best + 1e-9);
    }
  }
}

TEST_CASE("single self-loop state collapses to the geometric-series return") {
  distrl::TabularMdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = 1;
  mdp.gamma = 0.9;
  mdp.reward = {0.7};
  mdp.transition = {1.0};
  mdp.validate();

  const distrl::FixedPointResult fp = distrl::fixed_point(mdp, 8, {0}, 1e-12, 2000);
  CHECK(fp.converged);
  for (int i = 0; i < 8; ++i)
    CHECK(fp.z.at(0, 0).atoms[i] == doctest::Approx(0.7 / (1.0 - 0.9)).epsilon(1e-9));
}

TEST_CASE("zero discount returns the immediate reward distribution") {
  distrl::TabularMdp mdp = distrl::random_mdp(4, 3, 0.0, 9);
  std::mt19937_64 rng(10);
  const distrl::ReturnTable z = random_table(mdp, 5, rng);
  const distrl::DistTable out = distrl::bellman_policy_op(mdp, {0, 1, 2, 0}, z);
  for (int s = 0; s < 4; ++s)
    for (int a = 0; a < 3; ++a) {
      const DiscreteDist& d = out[s * 3 + a];
      REQUIRE(d.values.size() == 1);
      CHECK(d.values[0] == doctest::Approx(mdp.r(s, a)).epsilon(1e-14));
    }
}

TEST_CASE("chain return distribution matches monte-carlo rollouts") {
  // State 0 pays 1 and stays with probability one half; state 1 absorbs at
  // zero reward.
  distrl::TabularMdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 1;
  mdp.gamma = 0.8;
  mdp.reward = {1.0, 0.0};
  mdp.transition = {0.5, 0.5, 0.0, 1.0};
  mdp.validate();

  const distrl::FixedPointResult fp = distrl::fixed_point(mdp, 512, {0, 0}, 1e-10, 500);
  REQUIRE(fp.converged);

  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n_rollouts = 1000000;
  std::vector<double> returns(n_rollouts);
  for (int k = 0; k < n_rollouts; ++k) {
    double g = 0.0, scale = 1.0;
    int s = 0;
    while (s == 0 && scale > 1e-10) {
      g += scale * 1.0;
      scale *= mdp.gamma;
      if (u01(rng) < 0.5) s = 1;
    }
    returns[k] = g;
  }
  DiscreteDist mc;
  mc.values = std::move(returns);
  mc.probs.assign(n_rollouts, 1.0 / n_rollouts);
  mc.normalize_and_sort();

  CHECK(distrl::wasserstein(fp.z.at(0, 0).to_discrete(), mc, 1.0) < 0.01);
}

TEST_CASE("with one action both backup operators coincide") {
  distrl::TabularMdp mdp = distrl::random_mdp(4, 1, 0.85, 11);
  std::mt19937_64 rng(12);
  const distrl::ReturnTable z = random_table(mdp, 6, rng);
  const distrl::DistTable a = distrl::bellman_policy_op(mdp, {0, 0, 0, 0}, z);
  const distrl::DistTable b = distrl::bellman_optimality_op(mdp, z);
  for (size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].values.size() == b[i].values.size());
    for (size_t j = 0; j < a[i].values.size(); ++j) {
      CHECK(a[i].values[j] == b[i].values[j]);
      CHECK(a[i].probs[j] == b[i].probs[j]);
    }
  }
}

TEST_CASE("greedy backup follows the dominant arm of a bandit") {
  // Two states: s0 transitions to s1 under either action; s1 absorbs. The
  // successor mix at s1 must use only its better action.
  distrl::TabularMdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 2;
  mdp.gamma = 0.5;
  mdp.reward = {0.0, 0.0, 0.0, 0.0};
  mdp.transition = {0, 1, 0, 1, 0, 1, 0, 1};
  mdp.validate();

  distrl::ReturnTable z = distrl::ReturnTable::zeros(mdp, 2);
  z.at(1, 0).atoms << 1.0, 1.0;  // mean 1
  z.at(1, 1).atoms << 0.0, 0.0;  // mean 0

  const distrl::DistTable out = distrl::bellman_optimality_op(mdp, z);
  const DiscreteDist& d = out[0];  // (s0, a0)
  REQUIRE(d.values.size() == 1);
  CHECK(d.values[0] == doctest::Approx(0.5 * 1.0).epsilon(1e-14));
}

TEST_CASE("means of the greedy fixed point match value iteration") {
  for (std::uint64_t seed : {21, 22, 23, 24}) {
    distrl::TabularMdp mdp = distrl::random_mdp(4, 3, 0.9, seed);
    const distrl::FixedPointResult fp = distrl::fixed_point(mdp, 64, {}, 1e-12, 4000);
    REQUIRE(fp.converged);
    const Eigen::MatrixXd q_star = distrl::value_iteration(mdp, 1e-14, 100000);
    CHECK((fp.z.means() - q_star).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("projected backups never expand table distances") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ug(0.5, 0.99);
  for (int trial = 0; trial < 40; ++trial) {
    const int ns = 2 + static_cast<int>(rng() % 5);
    const int na = 1 + static_cast<int>(rng() % 4);
    distrl::TabularMdp mdp = distrl::random_mdp(ns, na, ug(rng), rng());
    const int n_atoms = 1 + static_cast<int>(rng() % 8);
    const distrl::ReturnTable z1 = random_table(mdp, n_atoms, rng);
    const distrl::ReturnTable z2 = random_table(mdp, n_atoms, rng);
    std::vector<int> pi(ns);
    for (int s = 0; s < ns; ++s) pi[s] = static_cast<int>(rng() % na);

    const distrl::ReturnTable b1 = distrl::backup(mdp, z1, pi);
    const distrl::ReturnTable b2 = distrl::backup(mdp, z2, pi);
    const double before = distrl::dbar(z1, z2, 0.0);
    const double after = distrl::dbar(b1, b2, 0.0);
    CHECK(after <= mdp.gamma * before + 1e-12);
  }
}

TEST_CASE("iterated projected backups converge to an init-independent point") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const double gamma = 0.5 + 0.45 * (trial / 9.0);
    distrl::TabularMdp mdp = distrl::random_mdp(4, 2, gamma, 100 + trial);
    std::vector<int> pi = {0, 1, 0, 1};

    const int bound = static_cast<int>(std::ceil(std::log(1e-8) / std::log(gamma))) + 400;
    const distrl::FixedPointResult a = distrl::fixed_point(mdp, 16, pi, 1e-9, bound, 1);
    const distrl::FixedPointResult b = distrl::fixed_point(mdp, 16, pi, 1e-9, bound, 2);
    CHECK(a.converged);
    CHECK(b.converged);
    CHECK(a.iterations <= bound);
    CHECK(distrl::dbar(a.z, b.z, 0.0) < 1e-6);
  }
}

TEST_CASE("greedy improvement never lowers any action value") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    distrl::TabularMdp mdp = distrl::random_mdp(5, 3, 0.9, 200 + trial);
    std::vector<int> pi(5);
    for (int s = 0; s < 5; ++s) pi[s] = static_cast<int>(rng() % 3);

    Eigen::MatrixXd q = distrl::policy_q_exact(mdp, pi);
    const int cap = 243;  // 3^5 distinct deterministic policies
    int rounds = 0;
    for (; rounds < cap; ++rounds) {
      const std::vector<int> improved = distrl::greedy_from_q(q);
      if (improved == pi) break;
      const Eigen::MatrixXd q_next = distrl::policy_q_exact(mdp, improved);
      CHECK(((q_next - q).array() >= -1e-9).all());
      pi = improved;
      q = q_next;
    }
    CHECK(rounds < cap);
  }
}

TEST_CASE("improvement sequence helper reaches a fixed policy") {
  distrl::TabularMdp mdp = distrl::random_mdp(5, 3, 0.95, 77);
  const distrl::PolicyIterationResult res =
      distrl::policy_improvement_sequence(mdp, {0, 0, 0, 0, 0}, 243);
  CHECK(res.converged);
  const std::vector<int> again = distrl::greedy_from_q(res.q);
  CHECK(again == res.policy);
}

TEST_CASE("pinball loss vanishes when atoms sit on the only target") {
  Eigen::VectorXd pred(3);
  pred << 2.0, 2.0, 2.0;
  Eigen::VectorXd targets(2);
  targets << 2.0, 2.0;
  const distrl::LossResult r = distrl::quantile_huber_loss(pred, targets, 1.0);
  CHECK(r.loss == 0.0);
  CHECK(r.grad.norm() == 0.0);
}

TEST_CASE("one-atom pinball loss is flat between far targets and tilts outside") {
  Eigen::VectorXd targets(2);
  targets << 0.0, 10.0;
  auto grad_at = [&](double q, double kappa) {
    Eigen::VectorXd pred(1);
    pred << q;
    return distrl::quantile_huber_loss(pred, targets, kappa).grad[0];
  };
  // Both residuals sit on the linear branch: the pulls cancel exactly.
  CHECK(grad_at(2.0, 1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(grad_at(5.0, 1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(grad_at(8.0, 1.0) == doctest::Approx(0.0).epsilon(1e-14));
  // Squared branch: the gradient changes sign across the midpoint.
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(grad_at(4.0, inf) < 0.0);
  CHECK(grad_at(6.0, inf) > 0.0);
}

TEST_CASE("pinball gradient matches central differences") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> uv(-2.0, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const int m = 1 + static_cast<int>(rng() % 6);
    Eigen::VectorXd pred(n), targets(m);
    for (int i = 0; i < n; ++i) pred[i] = uv(rng);
    for (int j = 0; j < m; ++j) targets[j] = uv(rng);

    const distrl::LossResult r = distrl::quantile_huber_loss(pred, targets, 1.0);
    const double h = 1e-6;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd pp = pred, pm = pred;
      pp[i] += h;
      pm[i] -= h;
      const double fd = (distrl::quantile_huber_loss(pp, targets, 1.0).loss -
                         distrl::quantile_huber_loss(pm, targets, 1.0).loss) /
                        (2 * h);
      CHECK(std::abs(fd - r.grad[i]) < 1e-6);
    }
  }
}

TEST_CASE("pinball loss rejects empty inputs") {
  Eigen::VectorXd pred(1), empty(0);
  pred << 1.0;
  CHECK_THROWS(distrl::quantile_huber_loss(pred, empty, 1.0));
  CHECK_THROWS(distrl::quantile_huber_loss(empty, pred, 1.0));
}

TEST_CASE("histogram divergence is zero only between equal histograms") {
  Eigen::VectorXd p(3);
  p << 0.2, 0.5, 0.3;
  CHECK(distrl::kl_histogram_loss(p, p, 1e-12).loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("histogram divergence of a sure event against a fair coin is log two") {
  DiscreteDist p, q;
  p.values = {0.0, 1.0};
  p.probs = {1.0, 0.0};
  q.values = {0.0, 1.0};
  q.probs = {0.5, 0.5};
  CHECK(distrl::kl_histogram_loss(p, q, 1e-12) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Eigen::VectorXd pv(2), qv(2);
  pv << 1.0, 0.0;
  qv << 0.5, 0.5;
  CHECK(distrl::kl_histogram_loss(pv, qv, 1e-12).loss ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("histogram divergence is non-negative on random pairs") {
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> up(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    Eigen::VectorXd p(n), q(n);
    for (int i = 0; i < n; ++i) {
      p[i] = up(rng);
      q[i] = up(rng);
    }
    p /= p.sum();
    q /= q.sum();
    CHECK(distrl::kl_histogram_loss(p, q, 1e-12).loss >= -1e-12);
  }
}

TEST_CASE("histogram divergence requires a shared bin grid") {
  DiscreteDist p, q;
  p.values = {0.0, 1.0};
  p.probs = {0.5, 0.5};
  q.values = {0.0, 2.0};
  q.probs = {0.5, 0.5};
  CHECK_THROWS(distrl::kl_histogram_loss(p, q, 1e-12));
}

TEST_CASE("inverse cdf midpoint levels are correct") {
  const Eigen::VectorXd tau = distrl::quantile_midpoints(4);
  CHECK(tau[0] == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(tau[1] == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(tau[2] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(tau[3] == doctest::Approx(0.875).epsilon(1e-15));
}
