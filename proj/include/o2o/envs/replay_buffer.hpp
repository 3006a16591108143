#pragma once

#include <cstdint>
#include <deque>

#include "o2o/envs/dataset.hpp"

namespace o2o::envs {

/// FIFO ring of transitions. capacity == 0 means unbounded.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  void push(Transition tr);
  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return items_.empty(); }
  const Transition& operator[](std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

/// floor(mix * batch_size) samples drawn uniformly (with replacement) from the
/// dataset, the rest from the buffer. Deterministic in seed.
Batch mixed_batch(const Dataset& data, const ReplayBuffer& buffer, std::size_t batch_size, double mix,
                  std::uint64_t seed);

/// batch_size uniform samples from the dataset only.
Batch dataset_batch(const Dataset& data, std::size_t batch_size, std::uint64_t seed);

}  // namespace o2o::envs
