#include "o2o/envs/replay_buffer.hpp"

#include <cmath>

#include "o2o/error.hpp"

namespace o2o::envs {

void ReplayBuffer::push(Transition tr) {
  if (capacity_ != 0 && items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(tr));
}

Batch dataset_batch(const Dataset& data, std::size_t batch_size, std::uint64_t seed) {
  if (data.empty()) throw InvalidArgument("cannot sample from an empty dataset");
  Rng rng(seed);
  Batch batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = rng.uniform_index(data.num_transitions());
    batch.push_back({data.transition(j), data.w(j), data.mc_return(j)});
  }
  return batch;
}

Batch mixed_batch(const Dataset& data, const ReplayBuffer& buffer, std::size_t batch_size, double mix,
                  std::uint64_t seed) {
  if (batch_size < 2) throw InvalidArgument("batch_size must be >= 2");
  if (!(mix >= 0.0 && mix <= 1.0)) throw InvalidArgument("mix must lie in [0, 1]");
  const auto from_data = static_cast<std::size_t>(std::floor(mix * static_cast<double>(batch_size)));
  const std::size_t from_buffer = batch_size - from_data;
  if (from_data > 0 && data.empty()) throw InvalidArgument("dataset is empty but has a nonzero share");
  if (from_buffer > 0 && buffer.empty()) throw InvalidArgument("replay buffer is empty but has a nonzero share");
  Rng rng(seed);
  Batch batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < from_data; ++i) {
    const std::size_t j = rng.uniform_index(data.num_transitions());
    batch.push_back({data.transition(j), data.w(j), data.mc_return(j)});
  }
  for (std::size_t i = 0; i < from_buffer; ++i) {
    const std::size_t j = rng.uniform_index(buffer.size());
    batch.push_back({buffer[j], 1.0, std::numeric_limits<double>::quiet_NaN()});
  }
  return batch;
}

}  // namespace o2o::envs
