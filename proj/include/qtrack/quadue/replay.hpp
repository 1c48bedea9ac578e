#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <random>
#include <vector>

namespace qtrack::quadue {

struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd s_next;
  bool done = false;
};

// Fixed-capacity ring buffer with uniform sampling over current occupancy.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  void insert(Transition t);
  size_t size() const { return full_ ? data_.size() : head_; }
  size_t capacity() const { return data_.size(); }
  const Transition& at(size_t i) const { return data_[i]; }

  std::vector<size_t> sample_indices(size_t batch, std::mt19937_64& rng) const;

 private:
  std::vector<Transition> data_;
  size_t head_ = 0;
  bool full_ = false;
};

}  // namespace qtrack::quadue
