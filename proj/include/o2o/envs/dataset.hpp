#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "o2o/envs/env.hpp"

namespace o2o::envs {

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s2;
  bool done = false;
  std::int64_t traj = 0;
  std::int64_t t = 0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct Trajectory {
  std::vector<Transition> transitions;
  /// Monte-Carlo values: mc_returns[t] = r_t + gamma * mc_returns[t+1].
  std::vector<double> mc_returns;
  /// Discounted return, equal to mc_returns[0].
  double discounted_return = 0.0;
  bool success = false;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Recomputes mc_returns and the discounted return from the rewards.
void compute_returns(Trajectory& traj, double gamma);

/// Discounted return for dense tasks, success indicator for sparse ones.
double trajectory_outcome(const EnvSpec& env, const Trajectory& traj);

/// Offline data with outcome-conditioning labels.
class Dataset {
 public:
  Dataset() = default;
  /// Computes w labels from the trajectories. Throws InvalidArgument when a
  /// transition does not match the env dimensions.
  Dataset(EnvSpec env, std::vector<Trajectory> trajectories);

  const EnvSpec& env() const noexcept { return env_; }
  const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
  std::size_t num_transitions() const noexcept { return index_.size(); }
  bool empty() const noexcept { return index_.empty(); }

  /// Flat transition access in (trajectory, step) order.
  const Transition& transition(std::size_t i) const;
  double w(std::size_t i) const { return w_labels_[i]; }
  double mc_return(std::size_t i) const;
  std::span<const double> w_labels() const noexcept { return w_labels_; }

  /// Min-max normalised outcome per trajectory; all ones when outcomes coincide.
  static std::vector<double> normalize_outcomes(std::span<const double> outcomes);

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.env_ == b.env_ && a.trajectories_ == b.trajectories_ && a.w_labels_ == b.w_labels_;
  }

 private:
  EnvSpec env_;
  std::vector<Trajectory> trajectories_;
  std::vector<std::pair<std::size_t, std::size_t>> index_;
  std::vector<double> w_labels_;
};

/// Rolls out `behavior` n_trajectories times. Episode i resets with a seed derived
/// from (seed, i); the behaviour policy draws from a stream derived from seed.
Dataset generate_dataset(const EnvSpec& env, const Policy& behavior, std::size_t n_trajectories,
                         std::uint64_t seed);

/// Newline-delimited JSON: a header object, then one object per transition.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
/// Throws ParseError (with line and byte offset) on malformed input and
/// InvalidArgument when a record disagrees with the header dimensions.
/// Missing "mc" fields are recomputed from the rewards.
Dataset load_dataset(const std::filesystem::path& path);

/// One sampled transition together with its labels.
struct Sample {
  Transition tr;
  double w = 1.0;
  /// NaN when no Monte-Carlo value is available (e.g. online data).
  double mc = std::numeric_limits<double>::quiet_NaN();
};

using Batch = std::vector<Sample>;

bool has_mc_returns(const Batch& batch);

}  // namespace o2o::envs
