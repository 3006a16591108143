#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "o2o/numkit/mlp.hpp"

namespace o2o::agents {

using numkit::MlpSpec;
using numkit::ParamVector;

/// Diagonal Gaussian policy pi_phi(a | s). The network maps a state to
/// [mean (A values), raw log-std (A values)]; the log-std is clamped to
/// [kExpClampLow, kExpClampHigh] before the exp transform. With `squash` the
/// sample u is mapped into the action box as a = centre + half * tanh(u).
struct GaussianPolicy {
  ParamVector params;
  std::vector<double> action_low;
  std::vector<double> action_high;
  bool squash = true;

  static GaussianPolicy create(std::size_t state_dim, const std::vector<double>& action_low,
                               const std::vector<double>& action_high, const std::vector<std::size_t>& hidden,
                               numkit::Activation activation, bool squash, Rng& rng);

  std::size_t state_dim() const { return params.spec().input_dim(); }
  std::size_t action_dim() const { return action_low.size(); }
  void validate() const;

  friend bool operator==(const GaussianPolicy&, const GaussianPolicy&) = default;
};

/// One forward pass of the policy network at a state.
struct PolicyHead {
  numkit::MlpTrace trace;
  std::vector<double> mean;
  /// Clamped log standard deviation.
  std::vector<double> log_std;
  std::vector<double> std;
  /// 1 where the raw log-std lies inside the clamp range, else 0.
  std::vector<double> log_std_live;
};

PolicyHead policy_head(const GaussianPolicy& policy, std::span<const double> s);

struct PolicySample {
  std::vector<double> action;
  /// Pre-squash sample u = mean + std * noise.
  std::vector<double> u;
  std::vector<double> noise;
  double log_prob = 0.0;
};

/// Reparameterized sample with the given standard-normal noise.
PolicySample sample_with_noise(const GaussianPolicy& policy, const PolicyHead& head, std::span<const double> noise);

/// Draws noise from rng and samples.
PolicySample policy_sample(const GaussianPolicy& policy, const PolicyHead& head, Rng& rng);

/// Reparameterized sample and log pi(a|s) using Rng(seed).
PolicySample policy_sample_logprob(const GaussianPolicy& policy, std::span<const double> s, std::uint64_t seed);

/// Accumulates into grad_params the parameter gradient of a loss that depends on
/// a reparameterized sample through dL/da and dL/dlog_pi.
void sample_backward(const GaussianPolicy& policy, const PolicyHead& head, const PolicySample& sample,
                     std::span<const double> dloss_daction, double dloss_dlogp, std::span<double> grad_params);

/// Greedy action: centre + half * tanh(mean) when squashed, else the mean clipped to the box.
std::vector<double> mean_action(const GaussianPolicy& policy, const PolicyHead& head);
std::vector<double> mean_action(const GaussianPolicy& policy, std::span<const double> s);

/// Parameter gradient of a loss through the greedy action.
void mean_action_backward(const GaussianPolicy& policy, const PolicyHead& head, std::span<const double> dloss_daction,
                          std::span<double> grad_params);

/// log pi(a|s) of a given action. Squashed actions are pulled back through atanh
/// with |(a - centre)/half| clamped to 1 - 1e-6. When dlogp_dhead is non-null it
/// receives d log pi / d[mean, clamped log-std] (length 2A).
double log_prob_at(const GaussianPolicy& policy, const PolicyHead& head, std::span<const double> action,
                   std::vector<double>* dlogp_dhead = nullptr);

/// Backpropagates a gradient with respect to [mean, clamped log-std] into the parameters.
void head_backward(const GaussianPolicy& policy, const PolicyHead& head, std::span<const double> dhead,
                   std::span<double> grad_params);

}  // namespace o2o::agents
