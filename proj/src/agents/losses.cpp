#include "o2o/agents/losses.hpp"

#include <algorithm>
#include <cmath>

#include "o2o/error.hpp"

namespace o2o::agents {

namespace {

void require_batch(const Batch& batch, const char* what) {
  if (batch.empty()) throw InvalidArgument(std::string(what) + " needs a nonempty batch");
}

std::vector<ParamVector> zero_grads(const std::vector<ParamVector>& members) {
  std::vector<ParamVector> g;
  g.reserve(members.size());
  for (const auto& m : members) g.emplace_back(m.spec());
  return g;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

double not_done(const envs::Sample& b) { return b.tr.done ? 0.0 : 1.0; }

// Accumulates scale * dQ/dtheta at (s, a) into grad.
void q_param_grad(const ParamVector& q, std::span<const double> s, std::span<const double> a, double scale,
                  ParamVector& grad) {
  const auto tr = numkit::mlp_trace(q, critic_input(s, a));
  numkit::mlp_backward(q, tr, std::span<const double>(&scale, 1), grad.values());
}

}  // namespace

void LossParams::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("gamma must lie in [0, 1)");
  if (!(kappa >= 0.0)) throw InvalidArgument("kappa must be >= 0");
  if (!(cql_alpha >= 0.0)) throw InvalidArgument("cql_alpha must be >= 0");
  if (!(expectile > 0.0 && expectile < 1.0)) throw InvalidArgument("expectile must lie in (0, 1)");
  if (!(iql_temperature > 0.0)) throw InvalidArgument("iql_temperature must be > 0");
  if (!(awr_temperature > 0.0)) throw InvalidArgument("awr_temperature must be > 0");
  if (!(td3bc_beta >= 0.0)) throw InvalidArgument("td3bc_beta must be >= 0");
  if (!(td3_noise >= 0.0) || !(td3_noise_clip >= 0.0)) throw InvalidArgument("td3 noise settings must be >= 0");
  if (!(weight_clip > 0.0)) throw InvalidArgument("weight_clip must be > 0");
  if (!std::isfinite(target_entropy_scale) || !std::isfinite(score_w)) {
    throw InvalidArgument("target_entropy_scale and score_w must be finite");
  }
}

CriticLoss regress_critics(const std::vector<ParamVector>& members, const Batch& batch,
                           const std::vector<double>& targets) {
  require_batch(batch, "critic regression");
  if (targets.size() != batch.size()) throw InvalidArgument("one target per batch item required");
  CriticLoss out;
  out.grads = zero_grads(members);
  out.targets = targets;
  const double scale = 1.0 / (static_cast<double>(members.size()) * static_cast<double>(batch.size()));
  for (std::size_t j = 0; j < members.size(); ++j) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto tr = numkit::mlp_trace(members[j], critic_input(batch[i].tr.s, batch[i].tr.a));
      const double d = tr.output[0] - targets[i];
      out.loss += scale * d * d;
      const double up = 2.0 * scale * d;
      numkit::mlp_backward(members[j], tr, std::span<const double>(&up, 1), out.grads[j].values());
    }
  }
  check_finite(out.loss, "critic loss");
  return out;
}

CriticLoss sac_critic_loss(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                           double entropy_coef, double gamma, std::uint64_t seed) {
  require_batch(batch, "sac_critic_loss");
  Rng rng(seed);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& b = batch[i];
    const auto head = policy_head(policy, b.tr.s2);
    const auto next = policy_sample(policy, head, rng);
    const double qn = min_q_value(critics.targets, b.tr.s2, next.action);
    y[i] = b.tr.r + gamma * not_done(b) * (qn - entropy_coef * next.log_prob);
    check_finite(y[i], "critic target");
  }
  return regress_critics(critics.members, batch, y);
}

PolicyLoss sac_policy_loss(const GaussianPolicy& policy, const ActionValueFn& q, const Batch& batch,
                           double entropy_coef, std::uint64_t seed) {
  require_batch(batch, "sac_policy_loss");
  Rng rng(seed);
  PolicyLoss out{0.0, ParamVector(policy.params.spec()), 0.0};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> ga;
  for (const auto& b : batch) {
    const auto head = policy_head(policy, b.tr.s);
    const auto smp = policy_sample(policy, head, rng);
    const double qv = q(b.tr.s, smp.action, &ga);
    out.loss += inv_n * (entropy_coef * smp.log_prob - qv);
    out.mean_log_prob += inv_n * smp.log_prob;
    for (double& g : ga) g *= -inv_n;
    sample_backward(policy, head, smp, ga, entropy_coef * inv_n, out.grad.values());
  }
  check_finite(out.loss, "policy loss");
  return out;
}

PolicyLoss sac_policy_loss(const GaussianPolicy& policy, const CriticEnsemble& critics, const Batch& batch,
                           double entropy_coef, std::uint64_t seed) {
  return sac_policy_loss(policy, min_q(critics.members), batch, entropy_coef, seed);
}

double entropy_coef_grad(double mean_log_prob, double target_entropy) { return -(mean_log_prob + target_entropy); }

ActionSet sample_B(const GaussianPolicy& policy, const Batch& batch, std::size_t count, std::uint64_t seed) {
  require_batch(batch, "sample_B");
  if (count == 0 || count % 2 != 0) throw InvalidArgument("sample_B count must be even and positive");
  Rng rng(seed);
  ActionSet out;
  out.policy_count = count / 2;
  out.actions.reserve(count);
  out.state_index.reserve(count);
  const std::size_t n = batch.size();
  for (std::size_t k = 0; k < out.policy_count; ++k) {
    const auto head = policy_head(policy, batch[k % n].tr.s);
    out.actions.push_back(policy_sample(policy, head, rng).action);
    out.state_index.push_back(k % n);
  }
  for (std::size_t k = out.policy_count; k < count; ++k) {
    std::vector<double> a(policy.action_dim());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.uniform(policy.action_low[i], policy.action_high[i]);
    out.actions.push_back(std::move(a));
    out.state_index.push_back(k % n);
  }
  return out;
}

ScoreMatchLoss score_match_loss(const CriticEnsemble& critics, const ParamVector& alpha_net,
                                const diffusion::NoisePredictor& score, double w, const Batch& batch,
                                const ActionSet& actions) {
  require_batch(batch, "score_match_loss");
  if (actions.actions.empty()) throw InvalidArgument("score_match_loss needs sampled actions");
  ScoreMatchLoss out{0.0, zero_grads(critics.members), ParamVector(alpha_net.spec())};
  const std::size_t n_members = critics.size();
  const double scale = 1.0 / (static_cast<double>(n_members) * static_cast<double>(actions.actions.size()));

  std::vector<numkit::MlpTrace> alpha_trace(batch.size());
  std::vector<bool> alpha_ready(batch.size(), false);
  std::vector<double> dalpha(batch.size(), 0.0);

  std::vector<double> g, dir, zero{0.0}, one{1.0};
  for (std::size_t k = 0; k < actions.actions.size(); ++k) {
    const std::size_t i = actions.state_index[k];
    const auto& s = batch[i].tr.s;
    const auto& a = actions.actions[k];
    if (!alpha_ready[i]) {
      alpha_trace[i] = numkit::mlp_trace(alpha_net, s);
      alpha_ready[i] = true;
    }
    const double alpha = alpha_trace[i].output[0];
    const auto eps = score(a, s, w, 1);
    const auto x = critic_input(s, a);
    for (std::size_t j = 0; j < n_members; ++j) {
      q_value_grad_a(critics.members[j], s, a, g);
      dir.assign(x.size(), 0.0);
      double r_dot_eps = 0.0;
      for (std::size_t d = 0; d < a.size(); ++d) {
        const double r = g[d] - alpha * eps[d];
        out.loss += scale * r * r;
        if (!std::isfinite(g[d])) throw NumericError("non-finite action gradient of Q in score matching");
        dir[s.size() + d] = 2.0 * scale * r;
        r_dot_eps += r * eps[d];
      }
      numkit::mlp_tangent_grad(critics.members[j], x, dir, zero, one, out.critic_grads[j].values());
      dalpha[i] += -2.0 * scale * r_dot_eps;
    }
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!alpha_ready[i]) continue;
    numkit::mlp_backward(alpha_net, alpha_trace[i], std::span<const double>(&dalpha[i], 1), out.alpha_grad.values());
  }
  check_finite(out.loss, "score-matching loss");
  return out;
}

SmacCriticLoss smac_critic_loss(const CriticEnsemble& critics, const ParamVector& alpha_net,
                                const GaussianPolicy& policy, const diffusion::NoisePredictor& score,
                                const Batch& batch, double entropy_coef, const LossParams& params,
                                std::uint64_t seed) {
  auto ac = sac_critic_loss(critics, policy, batch, entropy_coef, params.gamma, seed);
  SmacCriticLoss out;
  out.ac_loss = ac.loss;
  out.loss = ac.loss;
  out.critic_grads = std::move(ac.grads);
  out.targets = std::move(ac.targets);
  out.alpha_grad = ParamVector(alpha_net.spec());
  if (params.kappa == 0.0) return out;
  const auto acts = sample_B(policy, batch, 2 * batch.size(), derive_seed(seed, 0x5B));
  auto sm = score_match_loss(critics, alpha_net, score, params.score_w, batch, acts);
  out.sm_loss = sm.loss;
  out.loss += params.kappa * sm.loss;
  for (std::size_t j = 0; j < out.critic_grads.size(); ++j) out.critic_grads[j].axpy(params.kappa, sm.critic_grads[j]);
  out.alpha_grad.axpy(params.kappa, sm.alpha_grad);
  return out;
}

namespace {

CriticLoss conservative_penalty(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                                bool calibrated, std::uint64_t seed) {
  require_batch(batch, calibrated ? "calql_penalty" : "cql_penalty");
  if (calibrated && !envs::has_mc_returns(batch)) {
    throw InvalidArgument("calql_penalty needs Monte-Carlo returns for every batch item; use cql instead");
  }
  const auto acts = sample_B(policy, batch, 2 * batch.size(), seed);
  CriticLoss out;
  out.grads = zero_grads(critics.members);
  const double inv_members = 1.0 / static_cast<double>(critics.size());
  const double inv_b = inv_members / static_cast<double>(acts.actions.size());
  const double inv_d = inv_members / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < critics.size(); ++j) {
    const auto& q = critics.members[j];
    for (std::size_t k = 0; k < acts.actions.size(); ++k) {
      const auto& b = batch[acts.state_index[k]];
      const double qv = q_value(q, b.tr.s, acts.actions[k]);
      if (calibrated && b.mc < qv) {
        out.loss += inv_b * b.mc;
      } else {
        out.loss += inv_b * qv;
        q_param_grad(q, b.tr.s, acts.actions[k], inv_b, out.grads[j]);
      }
    }
    for (const auto& b : batch) {
      out.loss -= inv_d * q_value(q, b.tr.s, b.tr.a);
      q_param_grad(q, b.tr.s, b.tr.a, -inv_d, out.grads[j]);
    }
  }
  check_finite(out.loss, "conservative penalty");
  return out;
}

}  // namespace

CriticLoss cql_penalty(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                       std::uint64_t seed) {
  return conservative_penalty(critics, policy, batch, false, seed);
}

CriticLoss calql_penalty(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                         std::uint64_t seed) {
  return conservative_penalty(critics, policy, batch, true, seed);
}

CriticLoss cql_critic_loss(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                           double entropy_coef, const LossParams& params, bool calibrated, std::uint64_t seed) {
  auto out = sac_critic_loss(critics, policy, batch, entropy_coef, params.gamma, seed);
  if (params.cql_alpha == 0.0) return out;
  const auto pen = conservative_penalty(critics, policy, batch, calibrated, derive_seed(seed, 0xC9));
  out.loss += params.cql_alpha * pen.loss;
  for (std::size_t j = 0; j < out.grads.size(); ++j) out.grads[j].axpy(params.cql_alpha, pen.grads[j]);
  return out;
}

double expectile_weight(double u, double tau) { return std::abs(tau - (u < 0.0 ? 1.0 : 0.0)); }

IqlLosses iql_losses(const CriticEnsemble& critics, const ParamVector& value_net, const GaussianPolicy& policy,
                     const Batch& batch, const LossParams& params) {
  require_batch(batch, "iql_losses");
  if (!(params.expectile > 0.0 && params.expectile < 1.0)) throw InvalidArgument("expectile must lie in (0, 1)");
  IqlLosses out;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& b = batch[i];
    y[i] = b.tr.r + params.gamma * not_done(b) * state_net_value(value_net, b.tr.s2);
  }
  auto critic = regress_critics(critics.members, batch, y);
  out.critic_loss = critic.loss;
  out.critic_grads = std::move(critic.grads);

  out.value_grad = ParamVector(value_net.spec());
  out.policy_grad = ParamVector(policy.params.spec());
  std::vector<double> dhead;
  for (const auto& b : batch) {
    const auto vt = numkit::mlp_trace(value_net, b.tr.s);
    const double q = min_q_value(critics.targets, b.tr.s, b.tr.a);
    const double u = q - vt.output[0];
    const double wt = expectile_weight(u, params.expectile);
    out.value_loss += inv_n * wt * u * u;
    const double dv = -2.0 * inv_n * wt * u;
    numkit::mlp_backward(value_net, vt, std::span<const double>(&dv, 1), out.value_grad.values());

    const double weight = std::min(std::exp(u / params.iql_temperature), params.weight_clip);
    const auto head = policy_head(policy, b.tr.s);
    const double lp = log_prob_at(policy, head, b.tr.a, &dhead);
    out.policy_loss -= inv_n * weight * lp;
    for (double& d : dhead) d *= -inv_n * weight;
    head_backward(policy, head, dhead, out.policy_grad.values());
  }
  check_finite(out.value_loss, "IQL value loss");
  check_finite(out.policy_loss, "IQL policy loss");
  return out;
}

CriticLoss td3_critic_loss(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                           double gamma, double noise, double noise_clip, std::uint64_t seed) {
  require_batch(batch, "td3_critic_loss");
  Rng rng(seed);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& b = batch[i];
    auto a2 = mean_action(policy, b.tr.s2);
    if (noise > 0.0) {
      for (std::size_t d = 0; d < a2.size(); ++d) {
        const double h = 0.5 * (policy.action_high[d] - policy.action_low[d]);
        const double e = std::clamp(noise * h * rng.normal(), -noise_clip * h, noise_clip * h);
        a2[d] = std::clamp(a2[d] + e, policy.action_low[d], policy.action_high[d]);
      }
    }
    y[i] = b.tr.r + gamma * not_done(b) * min_q_value(critics.targets, b.tr.s2, a2);
    check_finite(y[i], "critic target");
  }
  return regress_critics(critics.members, batch, y);
}

PolicyLoss td3_policy_loss(const GaussianPolicy& policy, const ActionValueFn& q, const Batch& batch) {
  require_batch(batch, "td3_policy_loss");
  PolicyLoss out{0.0, ParamVector(policy.params.spec()), 0.0};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> ga;
  for (const auto& b : batch) {
    const auto head = policy_head(policy, b.tr.s);
    const auto a = mean_action(policy, head);
    out.loss -= inv_n * q(b.tr.s, a, &ga);
    for (double& g : ga) g *= -inv_n;
    mean_action_backward(policy, head, ga, out.grad.values());
  }
  check_finite(out.loss, "policy loss");
  return out;
}

Td3Losses td3_losses(const CriticEnsemble& critics, const GaussianPolicy& policy, const Batch& batch,
                     const LossParams& params, std::uint64_t seed) {
  return {td3_critic_loss(critics, policy, batch, params.gamma, params.td3_noise, params.td3_noise_clip, seed),
          td3_policy_loss(policy, min_q(critics.members), batch)};
}

PolicyLoss td3bc_policy_loss(const GaussianPolicy& policy, const ActionValueFn& q, const Batch& batch, double beta) {
  require_batch(batch, "td3bc_policy_loss");
  if (!(beta >= 0.0)) throw InvalidArgument("td3bc beta must be >= 0");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<PolicyHead> heads;
  std::vector<std::vector<double>> acts, grads(batch.size());
  std::vector<double> qs;
  double mean_abs = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    heads.push_back(policy_head(policy, batch[i].tr.s));
    acts.push_back(mean_action(policy, heads.back()));
    qs.push_back(q(batch[i].tr.s, acts.back(), &grads[i]));
    mean_abs += inv_n * std::abs(qs.back());
  }
  const double lambda = 1.0 / std::max(mean_abs, 1e-12);
  PolicyLoss out{0.0, ParamVector(policy.params.spec()), 0.0};
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<double> da(acts[i].size());
    double bc = 0.0;
    for (std::size_t d = 0; d < da.size(); ++d) {
      const double diff = acts[i][d] - batch[i].tr.a[d];
      bc += diff * diff;
      da[d] = inv_n * (-lambda * grads[i][d] + 2.0 * beta * diff);
    }
    out.loss += inv_n * (-lambda * qs[i] + beta * bc);
    mean_action_backward(policy, heads[i], da, out.grad.values());
  }
  check_finite(out.loss, "TD3+BC policy loss");
  return out;
}

PolicyLoss awr_policy_loss(const GaussianPolicy& policy, const ActionValueFn& q, const Batch& batch,
                           double temperature, double weight_clip, std::uint64_t seed) {
  require_batch(batch, "awr_policy_loss");
  if (!(temperature > 0.0)) throw InvalidArgument("AWR temperature must be > 0");
  Rng rng(seed);
  PolicyLoss out{0.0, ParamVector(policy.params.spec()), 0.0};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> dhead;
  for (const auto& b : batch) {
    const auto head = policy_head(policy, b.tr.s);
    const auto smp = policy_sample(policy, head, rng);
    const double adv = q(b.tr.s, b.tr.a, nullptr) - q(b.tr.s, smp.action, nullptr);
    const double weight = std::min(std::exp(adv / temperature), weight_clip);
    const double lp = log_prob_at(policy, head, b.tr.a, &dhead);
    out.loss -= inv_n * weight * lp;
    out.mean_log_prob += inv_n * smp.log_prob;
    for (double& d : dhead) d *= -inv_n * weight;
    head_backward(policy, head, dhead, out.grad.values());
  }
  check_finite(out.loss, "AWR policy loss");
  return out;
}

}  // namespace o2o::agents
