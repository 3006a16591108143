#include "o2o/agents/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "o2o/error.hpp"

namespace o2o::agents {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kAtanhLimit = 1.0 - 1e-6;

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(1 - tanh(u)^2), stable for large |u|
double log_dtanh(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

double centre(const GaussianPolicy& p, std::size_t i) { return 0.5 * (p.action_low[i] + p.action_high[i]); }
double half(const GaussianPolicy& p, std::size_t i) { return 0.5 * (p.action_high[i] - p.action_low[i]); }

}  // namespace

GaussianPolicy GaussianPolicy::create(std::size_t state_dim, const std::vector<double>& action_low,
                                      const std::vector<double>& action_high, const std::vector<std::size_t>& hidden,
                                      numkit::Activation activation, bool squash, Rng& rng) {
  MlpSpec spec;
  spec.widths.push_back(state_dim);
  spec.widths.insert(spec.widths.end(), hidden.begin(), hidden.end());
  spec.widths.push_back(2 * action_low.size());
  spec.activation = activation;
  GaussianPolicy p{ParamVector::glorot(spec, rng), action_low, action_high, squash};
  p.validate();
  return p;
}

void GaussianPolicy::validate() const {
  if (action_low.empty() || action_low.size() != action_high.size()) {
    throw InvalidArgument("policy action bounds are empty or mismatched");
  }
  for (std::size_t i = 0; i < action_low.size(); ++i) {
    if (!(action_low[i] < action_high[i])) throw InvalidArgument("policy action bound low >= high");
  }
  if (params.spec().output_dim() != 2 * action_low.size()) {
    throw InvalidArgument("policy network must output 2 * action_dim values");
  }
  if (params.spec().output != numkit::OutputTransform::identity) {
    throw InvalidArgument("policy network output transform must be identity");
  }
}

PolicyHead policy_head(const GaussianPolicy& policy, std::span<const double> s) {
  PolicyHead h;
  h.trace = numkit::mlp_trace(policy.params, s);
  const std::size_t a = policy.action_dim();
  h.mean.assign(h.trace.output.begin(), h.trace.output.begin() + static_cast<std::ptrdiff_t>(a));
  h.log_std.resize(a);
  h.std.resize(a);
  h.log_std_live.resize(a);
  for (std::size_t i = 0; i < a; ++i) {
    const double raw = h.trace.output[a + i];
    h.log_std[i] = std::clamp(raw, numkit::kExpClampLow, numkit::kExpClampHigh);
    h.log_std_live[i] = (raw > numkit::kExpClampLow && raw < numkit::kExpClampHigh) ? 1.0 : 0.0;
    h.std[i] = std::exp(h.log_std[i]);
  }
  return h;
}

PolicySample sample_with_noise(const GaussianPolicy& policy, const PolicyHead& head, std::span<const double> noise) {
  const std::size_t a = policy.action_dim();
  if (noise.size() != a) throw InvalidArgument("policy noise length mismatch");
  PolicySample out;
  out.noise.assign(noise.begin(), noise.end());
  out.u.resize(a);
  out.action.resize(a);
  double lp = 0.0;
  for (std::size_t i = 0; i < a; ++i) {
    out.u[i] = head.mean[i] + head.std[i] * noise[i];
    lp += -0.5 * noise[i] * noise[i] - head.log_std[i] - kHalfLog2Pi;
    if (policy.squash) {
      out.action[i] = centre(policy, i) + half(policy, i) * std::tanh(out.u[i]);
      lp -= log_dtanh(out.u[i]) + std::log(half(policy, i));
    } else {
      out.action[i] = out.u[i];
    }
  }
  out.log_prob = lp;
  if (!std::isfinite(lp)) throw NumericError("non-finite policy log-density");
  return out;
}

PolicySample policy_sample(const GaussianPolicy& policy, const PolicyHead& head, Rng& rng) {
  std::vector<double> noise(policy.action_dim());
  for (double& n : noise) n = rng.normal();
  return sample_with_noise(policy, head, noise);
}

PolicySample policy_sample_logprob(const GaussianPolicy& policy, std::span<const double> s, std::uint64_t seed) {
  Rng rng(seed);
  return policy_sample(policy, policy_head(policy, s), rng);
}

void head_backward(const GaussianPolicy& policy, const PolicyHead& head, std::span<const double> dhead,
                   std::span<double> grad_params) {
  const std::size_t a = policy.action_dim();
  std::vector<double> up(dhead.begin(), dhead.end());
  for (std::size_t i = 0; i < a; ++i) up[a + i] *= head.log_std_live[i];
  numkit::mlp_backward(policy.params, head.trace, up, grad_params);
}

void sample_backward(const GaussianPolicy& policy, const PolicyHead& head, const PolicySample& sample,
                     std::span<const double> dloss_daction, double dloss_dlogp, std::span<double> grad_params) {
  const std::size_t a = policy.action_dim();
  std::vector<double> dhead(2 * a);
  for (std::size_t i = 0; i < a; ++i) {
    double du = dloss_daction[i];
    if (policy.squash) {
      const double t = std::tanh(sample.u[i]);
      // d/du of -log(1 - tanh(u)^2) is 2 tanh(u)
      du = dloss_daction[i] * half(policy, i) * (1.0 - t * t) + dloss_dlogp * 2.0 * t;
    }
    dhead[i] = du;
    dhead[a + i] = du * head.std[i] * sample.noise[i] - dloss_dlogp;
  }
  head_backward(policy, head, dhead, grad_params);
}

std::vector<double> mean_action(const GaussianPolicy& policy, const PolicyHead& head) {
  std::vector<double> out(policy.action_dim());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = policy.squash ? centre(policy, i) + half(policy, i) * std::tanh(head.mean[i])
                           : std::clamp(head.mean[i], policy.action_low[i], policy.action_high[i]);
  }
  return out;
}

std::vector<double> mean_action(const GaussianPolicy& policy, std::span<const double> s) {
  return mean_action(policy, policy_head(policy, s));
}

void mean_action_backward(const GaussianPolicy& policy, const PolicyHead& head, std::span<const double> dloss_daction,
                          std::span<double> grad_params) {
  const std::size_t a = policy.action_dim();
  std::vector<double> dhead(2 * a, 0.0);
  for (std::size_t i = 0; i < a; ++i) {
    if (policy.squash) {
      const double t = std::tanh(head.mean[i]);
      dhead[i] = dloss_daction[i] * half(policy, i) * (1.0 - t * t);
    } else {
      const bool inside = head.mean[i] > policy.action_low[i] && head.mean[i] < policy.action_high[i];
      dhead[i] = inside ? dloss_daction[i] : 0.0;
    }
  }
  head_backward(policy, head, dhead, grad_params);
}

double log_prob_at(const GaussianPolicy& policy, const PolicyHead& head, std::span<const double> action,
                   std::vector<double>* dlogp_dhead) {
  const std::size_t a = policy.action_dim();
  if (action.size() != a) throw InvalidArgument("action length mismatch in log_prob_at");
  if (dlogp_dhead) dlogp_dhead->assign(2 * a, 0.0);
  double lp = 0.0;
  for (std::size_t i = 0; i < a; ++i) {
    double u = action[i];
    if (policy.squash) {
      const double y = std::clamp((action[i] - centre(policy, i)) / half(policy, i), -kAtanhLimit, kAtanhLimit);
      u = std::atanh(y);
      lp -= log_dtanh(u) + std::log(half(policy, i));
    }
    const double z = (u - head.mean[i]) / head.std[i];
    lp += -0.5 * z * z - head.log_std[i] - kHalfLog2Pi;
    if (dlogp_dhead) {
      (*dlogp_dhead)[i] = z / head.std[i];
      (*dlogp_dhead)[a + i] = z * z - 1.0;
    }
  }
  if (!std::isfinite(lp)) throw NumericError("non-finite policy log-density");
  return lp;
}

}  // namespace o2o::agents
