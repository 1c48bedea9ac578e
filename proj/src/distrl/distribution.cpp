#include "qtrack/distrl/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qtrack::distrl {

void DiscreteDist::normalize_and_sort() {
  if (values.size() != probs.size() || values.empty())
    throw std::invalid_argument("dist: values/probs size mismatch or empty");
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int i, int j) { return values[i] < values[j]; });

  std::vector<double> v, p;
  v.reserve(values.size());
  p.reserve(values.size());
  for (int i : idx) {
    if (probs[i] < 0.0) throw std::invalid_argument("dist: negative probability");
    if (probs[i] == 0.0) continue;
    if (!v.empty() && values[i] == v.back()) {
      p.back() += probs[i];
    } else {
      v.push_back(values[i]);
      p.push_back(probs[i]);
    }
  }
  if (v.empty()) throw std::invalid_argument("dist: no mass");
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) throw std::invalid_argument("dist: bad total mass");
  for (double& x : p) x /= total;
  values = std::move(v);
  probs = std::move(p);
}

double DiscreteDist::mean() const {
  double m = 0.0;
  for (size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
  return m;
}

double DiscreteDist::quantile(double tau) const {
  if (!(tau >= 0.0) || !(tau <= 1.0)) throw std::invalid_argument("dist: tau outside [0,1]");
  double cum = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    cum += probs[i];
    if (cum >= tau - 1e-15) return values[i];
  }
  return values.back();
}

DiscreteDist QuantileDist::to_discrete() const {
  if (atoms.size() == 0) throw std::invalid_argument("dist: empty quantile set");
  DiscreteDist d;
  d.values.assign(atoms.data(), atoms.data() + atoms.size());
  d.probs.assign(atoms.size(), 1.0 / static_cast<double>(atoms.size()));
  d.normalize_and_sort();
  return d;
}

Eigen::VectorXd quantile_midpoints(int n) {
  if (n <= 0) throw std::invalid_argument("dist: n must be positive");
  Eigen::VectorXd tau(n);
  for (int i = 0; i < n; ++i) tau[i] = (2.0 * i + 1.0) / (2.0 * n);
  return tau;
}

double wasserstein(const DiscreteDist& a, const DiscreteDist& b, double order) {
  const double ma = std::accumulate(a.probs.begin(), a.probs.end(), 0.0);
  const double mb = std::accumulate(b.probs.begin(), b.probs.end(), 0.0);
  if (std::abs(ma - 1.0) > 1e-9 || std::abs(mb - 1.0) > 1e-9)
    throw std::invalid_argument("wasserstein: distributions must be normalized");
  /* Walk the merged CDF breakpoints; both quantile functions are piecewise
   * constant in u, so each segment contributes |x - y|^p * du. */
  size_t ia = 0, ib = 0;
  double ca = 0.0, cb = 0.0, prev = 0.0;
  double acc = 0.0, worst = 0.0;
  while (ia < a.values.size() && ib < b.values.size()) {
    const double next_a = ca + a.probs[ia];
    const double next_b = cb + b.probs[ib];
    const double next = std::min(next_a, next_b);
    const double gap = std::abs(a.values[ia] - b.values[ib]);
    const double du = next - prev;
    if (du > 0.0) {
      acc += std::pow(gap, order > 0.0 ? order : 1.0) * du;
      worst = std::max(worst, gap);
    }
    if (next_a <= next + 1e-15) {
      ca = next_a;
      ++ia;
    }
    if (next_b <= next + 1e-15) {
      cb = next_b;
      ++ib;
    }
    prev = next;
  }
  if (order <= 0.0) return worst;
  return std::pow(acc, 1.0 / order);
}

double wasserstein(const QuantileDist& a, const QuantileDist& b, double order) {
  if (a.size() == b.size() && a.size() > 0) {
    /* Same atom count: the inverse CDFs pair atoms rank by rank. */
    const Eigen::ArrayXd gap = (a.atoms - b.atoms).array().abs();
    if (order <= 0.0) return gap.maxCoeff();
    return std::pow((gap.pow(order) / a.size()).sum(), 1.0 / order);
  }
  return wasserstein(a.to_discrete(), b.to_discrete(), order);
}

QuantileDist quantile_project(const DiscreteDist& d, int n) {
  const Eigen::VectorXd tau = quantile_midpoints(n);
  QuantileDist q;
  q.atoms.resize(n);
  size_t j = 0;
  double cum = d.probs.empty() ? 0.0 : d.probs[0];
  for (int i = 0; i < n; ++i) {
    while (j + 1 < d.values.size() && cum < tau[i] - 1e-15) cum += d.probs[++j];
    q.atoms[i] = d.values[j];
  }
  return q;
}

}  // namespace qtrack::distrl
