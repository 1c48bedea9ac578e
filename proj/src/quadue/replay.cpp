#include "qtrack/quadue/replay.hpp"

#include <stdexcept>

namespace qtrack::quadue {

ReplayBuffer::ReplayBuffer(size_t capacity) {
  if (capacity == 0) throw std::invalid_argument("replay: capacity must be positive");
  data_.resize(capacity);
}

void ReplayBuffer::insert(Transition t) {
  if (!t.s.allFinite() || !t.a.allFinite() || !std::isfinite(t.r) || !t.s_next.allFinite()) {
    throw std::invalid_argument("replay: non-finite transition");
  }
  data_[head_] = std::move(t);
  ++head_;
  if (head_ == data_.size()) {
    head_ = 0;
    full_ = true;
  }
}

std::vector<size_t> ReplayBuffer::sample_indices(size_t batch, std::mt19937_64& rng) const {
  const size_t n = size();
  if (n == 0) throw std::logic_error("replay: sampling from an empty buffer");
  std::uniform_int_distribution<size_t> pick(0, n - 1);
  std::vector<size_t> out(batch);
  for (size_t i = 0; i < batch; ++i) out[i] = pick(rng);
  return out;
}

}  // namespace qtrack::quadue
