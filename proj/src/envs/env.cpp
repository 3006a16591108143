#include "o2o/envs/env.hpp"

#include <algorithm>
#include <cmath>

#include "o2o/error.hpp"

namespace o2o::envs {

void EnvSpec::validate() const {
  if (state_dim == 0 || action_dim == 0) throw InvalidArgument("env dims must be positive");
  if (action_low.size() != action_dim || action_high.size() != action_dim) {
    throw InvalidArgument("action bounds do not match action_dim");
  }
  for (std::size_t i = 0; i < action_dim; ++i) {
    if (!std::isfinite(action_low[i]) || !std::isfinite(action_high[i]) || !(action_low[i] < action_high[i])) {
      throw InvalidArgument("action bounds must be finite with low < high");
    }
  }
  if (state_low.size() != state_dim || state_high.size() != state_dim || init_low.size() != state_dim ||
      init_high.size() != state_dim) {
    throw InvalidArgument("state boxes do not match state_dim");
  }
  if (horizon < 1) throw InvalidArgument("horizon must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("discount must lie in (0, 1)");
}

std::vector<std::string> builtin_env_names() { return {"reach2d", "gate1d"}; }

EnvSpec make_env(std::string_view name) {
  EnvSpec s;
  s.name = std::string(name);
  if (name == "reach2d") {
    s.state_dim = 2;
    s.action_dim = 2;
    s.action_low = {-1.0, -1.0};
    s.action_high = {1.0, 1.0};
    s.state_low = {-2.0, -2.0};
    s.state_high = {2.0, 2.0};
    s.init_low = {-1.0, -1.0};
    s.init_high = {1.0, 1.0};
    s.horizon = 50;
    s.reward_kind = RewardKind::dense;
    s.gamma = 0.99;
    s.reward_bound = std::sqrt(8.0);
  } else if (name == "gate1d") {
    s.state_dim = 1;
    s.action_dim = 1;
    s.action_low = {-1.0};
    s.action_high = {1.0};
    s.state_low = {-1.0};
    s.state_high = {1.0};
    s.init_low = {-0.1};
    s.init_high = {0.1};
    s.horizon = 40;
    s.reward_kind = RewardKind::sparse_binary;
    s.gamma = 0.99;
    s.reward_bound = 1.0;
  } else {
    throw InvalidArgument("unknown environment '" + std::string(name) + "'");
  }
  return s;
}

std::vector<double> env_reset(const EnvSpec& spec, std::uint64_t seed) {
  if (spec.name != "reach2d" && spec.name != "gate1d") {
    throw InvalidArgument("unknown environment '" + spec.name + "'");
  }
  spec.validate();
  Rng rng(derive_seed(seed, 0x5E5E7));
  std::vector<double> s(spec.state_dim);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = rng.uniform(spec.init_low[i], spec.init_high[i]);
  return s;
}

bool at_goal(const EnvSpec& spec, std::span<const double> state) {
  if (spec.name == "reach2d") return std::hypot(state[0], state[1]) < 0.05;
  if (spec.name == "gate1d") return state[0] >= kGateGoal;
  throw InvalidArgument("unknown environment '" + spec.name + "'");
}

StepResult env_step(const EnvSpec& spec, std::span<const double> state, std::span<const double> action) {
  if (state.size() != spec.state_dim) throw InvalidArgument("state dimension mismatch");
  if (action.size() != spec.action_dim) throw InvalidArgument("action dimension mismatch");
  StepResult res;
  std::vector<double> a(action.begin(), action.end());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) throw InvalidArgument("non-finite action");
    const double c = std::clamp(a[i], spec.action_low[i], spec.action_high[i]);
    if (c != a[i]) res.clipped = true;
    a[i] = c;
  }
  res.next_state.assign(state.begin(), state.end());
  if (spec.name == "reach2d") {
    for (std::size_t i = 0; i < 2; ++i) {
      res.next_state[i] =
          std::clamp(state[i] + kReachStepScale * a[i], spec.state_low[i], spec.state_high[i]);
    }
    res.reward = -std::hypot(res.next_state[0], res.next_state[1]);
    res.done = false;
  } else if (spec.name == "gate1d") {
    res.next_state[0] = std::clamp(state[0] + kGateStepScale * a[0], spec.state_low[0], spec.state_high[0]);
    res.done = res.next_state[0] >= kGateGoal;
    res.reward = res.done ? 0.0 : kGateStepPenalty;
  } else {
    throw InvalidArgument("unknown environment '" + spec.name + "'");
  }
  return res;
}

Policy scripted_expert(const EnvSpec& spec) {
  if (spec.name == "reach2d") {
    return [spec](std::span<const double> s, Rng&) {
      std::vector<double> a(2);
      for (std::size_t i = 0; i < 2; ++i) a[i] = std::clamp(-10.0 * s[i], spec.action_low[i], spec.action_high[i]);
      return a;
    };
  }
  if (spec.name == "gate1d") {
    return [spec](std::span<const double>, Rng&) { return std::vector<double>{spec.action_high[0]}; };
  }
  throw InvalidArgument("no scripted expert for '" + spec.name + "'");
}

Policy noisy_expert(const EnvSpec& spec, double noise_std) {
  Policy expert = scripted_expert(spec);
  return [spec, expert, noise_std](std::span<const double> s, Rng& rng) {
    std::vector<double> a = expert(s, rng);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = std::clamp(a[i] + noise_std * rng.normal(), spec.action_low[i], spec.action_high[i]);
    }
    return a;
  };
}

Policy uniform_random_policy(const EnvSpec& spec) {
  return [spec](std::span<const double>, Rng& rng) {
    std::vector<double> a(spec.action_dim);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(spec.action_low[i], spec.action_high[i]);
    return a;
  };
}

Rollout rollout(const EnvSpec& spec, const Policy& policy, std::uint64_t reset_seed, Rng& rng) {
  Rollout out;
  std::vector<double> s = env_reset(spec, reset_seed);
  for (std::size_t t = 0; t < spec.horizon; ++t) {
    std::vector<double> a = policy(s, rng);
    StepResult st = env_step(spec, s, a);
    if (st.clipped) {
      ++out.clipped_actions;
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], spec.action_low[i], spec.action_high[i]);
    }
    out.undiscounted_return += st.reward;
    out.steps.push_back({s, a, st.reward, st.next_state, st.done});
    s = std::move(st.next_state);
    if (st.done) break;
  }
  out.success = at_goal(spec, s);
  return out;
}

}  // namespace o2o::envs
