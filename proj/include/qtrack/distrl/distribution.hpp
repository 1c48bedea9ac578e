#pragma once

#include <Eigen/Dense>
#include <vector>

namespace qtrack::distrl {

/* Finite distribution as (value, prob) atoms, kept sorted by value with
 * probabilities normalized. */
struct DiscreteDist {
  std::vector<double> values;
  std::vector<double> probs;

  void normalize_and_sort();
  double mean() const;
  /* Left-continuous generalized inverse CDF: inf{x : F(x) >= tau}. */
  double quantile(double tau) const;
};

/* Equal-weight atom representation: N atoms each carrying mass 1/N, stored
 * non-decreasing. */
struct QuantileDist {
  Eigen::VectorXd atoms;

  int size() const { return static_cast<int>(atoms.size()); }
  double mean() const { return atoms.size() ? atoms.mean() : 0.0; }
  DiscreteDist to_discrete() const;
};

/* Midpoint quantile levels (2i-1)/(2N), i = 1..N. */
Eigen::VectorXd quantile_midpoints(int n);

/* p-Wasserstein distance between two finite distributions via the
 * inverse-CDF coupling; order <= 0 selects the infinity order. */
double wasserstein(const DiscreteDist& a, const DiscreteDist& b, double order);
double wasserstein(const QuantileDist& a, const QuantileDist& b, double order);

/* Best N-atom equal-weight approximation in 1-Wasserstein: inverse CDF
 * evaluated at the midpoint levels. */
QuantileDist quantile_project(const DiscreteDist& d, int n);

}  // namespace qtrack::distrl
