#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "o2o/rng.hpp"

namespace o2o::envs {

enum class RewardKind { dense, sparse_binary };

/// Static description of a built-in environment.
struct EnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> action_low;
  std::vector<double> action_high;
  /// States are confined to this box.
  std::vector<double> state_low;
  std::vector<double> state_high;
  /// d_0 is uniform on [init_low, init_high] (a degenerate box gives a fixed start).
  std::vector<double> init_low;
  std::vector<double> init_high;
  std::size_t horizon = 1;
  RewardKind reward_kind = RewardKind::dense;
  double gamma = 0.99;
  /// Upper bound on |reward|.
  double reward_bound = 1.0;

  void validate() const;
  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

/// Names of the built-in environments.
std::vector<std::string> builtin_env_names();

/// Throws InvalidArgument for unknown names.
EnvSpec make_env(std::string_view name);

inline constexpr double kReachStepScale = 0.1;
inline constexpr double kGateStepScale = 0.05;
inline constexpr double kGateGoal = 0.8;
/// Per-step reward of gate1d before the goal is reached.
inline constexpr double kGateStepPenalty = -1.0;

std::vector<double> env_reset(const EnvSpec& spec, std::uint64_t seed);

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  bool done = false;
  /// The action left the action box and was clipped.
  bool clipped = false;
};

/// Deterministic dynamics. Throws InvalidArgument on non-finite actions or
/// dimension mismatches; out-of-box actions are clipped.
StepResult env_step(const EnvSpec& spec, std::span<const double> state, std::span<const double> action);

/// Whether a state satisfies the task's goal (used for success flags).
bool at_goal(const EnvSpec& spec, std::span<const double> state);

/// Action-selection rule for rollouts. The Rng is owned by the rollout.
using Policy = std::function<std::vector<double>(std::span<const double> state, Rng& rng)>;

/// Proportional controller towards the goal, clipped to the action box.
Policy scripted_expert(const EnvSpec& spec);
/// Expert plus additive Gaussian noise of the given std (then clipped).
Policy noisy_expert(const EnvSpec& spec, double noise_std);
Policy uniform_random_policy(const EnvSpec& spec);

struct RolloutStep {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s2;
  bool done = false;
};

struct Rollout {
  std::vector<RolloutStep> steps;
  double undiscounted_return = 0.0;
  bool success = false;
  std::size_t clipped_actions = 0;
};

/// One episode from env_reset(spec, reset_seed) until done or the horizon.
Rollout rollout(const EnvSpec& spec, const Policy& policy, std::uint64_t reset_seed, Rng& rng);

}  // namespace o2o::envs
