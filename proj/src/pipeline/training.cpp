#include "o2o/pipeline/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "o2o/agents/losses.hpp"

namespace o2o::pipeline {

namespace {

using agents::Batch;
using numkit::ParamVector;

enum : std::uint64_t {
  kBatch = 0xBA7C,
  kCritic = 0xC1,
  kPolicy = 0x90,
  kWarm = 0x3A53,
  kWarmReset = 0x3A54,
  kEpisode = 0xE915,
  kOnlineBatch = 0x0B7C,
  kDiffusion = 0xD1F,
};

const char* phase_name(bool online) { return online ? "online" : "offline"; }

// Which update rule a step runs. The offline and online algorithm sets overlap.
enum class Rule { sac, smac, cql, calql, iql, td3, td3bc, awr };

Rule offline_rule(OfflineAlg a) {
  switch (a) {
    case OfflineAlg::smac: return Rule::smac;
    case OfflineAlg::sac: return Rule::sac;
    case OfflineAlg::cql: return Rule::cql;
    case OfflineAlg::calql: return Rule::calql;
    case OfflineAlg::iql: return Rule::iql;
    case OfflineAlg::td3bc: return Rule::td3bc;
  }
  return Rule::sac;
}

Rule online_rule(OnlineAlg a) {
  switch (a) {
    case OnlineAlg::sac: return Rule::sac;
    case OnlineAlg::td3: return Rule::td3;
    case OnlineAlg::td3bc: return Rule::td3bc;
    case OnlineAlg::awr: return Rule::awr;
  }
  return Rule::sac;
}

struct StepLosses {
  double critic = std::numeric_limits<double>::quiet_NaN();
  double policy = std::numeric_limits<double>::quiet_NaN();
  double score_match = std::numeric_limits<double>::quiet_NaN();
  double value = std::numeric_limits<double>::quiet_NaN();
};

class Stepper {
 public:
  Stepper(AgentCheckpoint& a, const ExperimentConfig& c, std::uint64_t step) : a_(a), c_(c), step_(step) {}

  void update(optim::OptState& s, ParamVector& p, const ParamVector& g, const char* what) {
    stage_ = what;
    optim::optimizer_update(s, p, g);
    if (!p.all_finite()) throw TrainingAborted(step_, what, "parameters left the finite range");
  }

  void update_critics(const std::vector<ParamVector>& grads) {
    for (std::size_t j = 0; j < grads.size(); ++j) update(a_.critic_opt[j], a_.critics.members[j], grads[j], "critic_loss");
  }

  void update_entropy(double mean_log_prob) {
    stage_ = "entropy_coef";
    std::vector<double> la{a_.log_entropy_coef};
    const std::vector<double> g{agents::entropy_coef_grad(mean_log_prob, c_.target_entropy())};
    optim::adam_update(a_.entropy_opt, la, g);
    a_.log_entropy_coef = la[0];
    if (!std::isfinite(la[0])) throw TrainingAborted(step_, "entropy_coef", "log coefficient left the finite range");
  }

  void polyak() {
    for (std::size_t j = 0; j < a_.critics.size(); ++j) {
      a_.critics.targets[j] = optim::polyak_update(a_.critics.targets[j], a_.critics.members[j], c_.polyak);
    }
  }

  double check(double v, const char* what) const {
    if (!std::isfinite(v)) throw TrainingAborted(step_, what, "loss value " + format_real(v));
    return v;
  }

  const char* stage() const { return stage_; }
  void set_stage(const char* s) { stage_ = s; }

 private:
  AgentCheckpoint& a_;
  const ExperimentConfig& c_;
  std::uint64_t step_;
  const char* stage_ = "critic_loss";
};

// One gradient step of `rule` on `batch`; `t` indexes the step within its phase.
StepLosses run_step(AgentCheckpoint& a, const ExperimentConfig& c, Rule rule, const Batch& batch,
                    const diffusion::NoisePredictor* score, std::uint64_t seed, std::uint64_t t) {
  StepLosses out;
  Stepper st(a, c, t);
  const auto& lp = c.loss;
  const std::uint64_t critic_seed = derive_seed(seed, t, kCritic);
  const std::uint64_t policy_seed = derive_seed(seed, t, kPolicy);
  try {
    switch (rule) {
      case Rule::sac:
      case Rule::smac:
      case Rule::cql:
      case Rule::calql: {
        const double ent = std::exp(a.log_entropy_coef);
        st.set_stage("critic_loss");
        if (rule == Rule::smac) {
          if (lp.kappa > 0.0 && !score) throw InvalidArgument("SMAC with kappa > 0 needs a trained score model");
          const diffusion::NoisePredictor none = [](std::span<const double>, std::span<const double>, double,
                                                    std::size_t) -> std::vector<double> {
            throw InvalidArgument("score model unavailable");
          };
          auto l = agents::smac_critic_loss(a.critics, a.alpha_net, a.policy, score ? *score : none, batch, ent, lp,
                                            critic_seed);
          out.critic = st.check(l.loss, "critic_loss");
          out.score_match = st.check(l.sm_loss, "score_match_loss");
          st.update_critics(l.critic_grads);
          if (lp.kappa > 0.0) st.update(a.alpha_opt, a.alpha_net, l.alpha_grad, "score_match_loss");
        } else if (rule == Rule::sac) {
          auto l = agents::sac_critic_loss(a.critics, a.policy, batch, ent, lp.gamma, critic_seed);
          out.critic = st.check(l.loss, "critic_loss");
          st.update_critics(l.grads);
        } else {
          auto l = agents::cql_critic_loss(a.critics, a.policy, batch, ent, lp, rule == Rule::calql, critic_seed);
          out.critic = st.check(l.loss, "critic_loss");
          st.update_critics(l.grads);
        }
        st.set_stage("policy_loss");
        auto pl = agents::sac_policy_loss(a.policy, a.critics, batch, ent, policy_seed);
        out.policy = st.check(pl.loss, "policy_loss");
        st.update(a.policy_opt, a.policy.params, pl.grad, "policy_loss");
        st.update_entropy(pl.mean_log_prob);
        break;
      }
      case Rule::iql: {
        st.set_stage("iql_loss");
        auto l = agents::iql_losses(a.critics, a.value_net, a.policy, batch, lp);
        out.critic = st.check(l.critic_loss, "critic_loss");
        out.value = st.check(l.value_loss, "value_loss");
        out.policy = st.check(l.policy_loss, "policy_loss");
        st.update_critics(l.critic_grads);
        st.update(a.value_opt, a.value_net, l.value_grad, "value_loss");
        st.update(a.policy_opt, a.policy.params, l.policy_grad, "policy_loss");
        break;
      }
      case Rule::td3:
      case Rule::td3bc: {
        st.set_stage("critic_loss");
        auto l = agents::td3_critic_loss(a.critics, a.policy, batch, lp.gamma, lp.td3_noise, lp.td3_noise_clip,
                                         critic_seed);
        out.critic = st.check(l.loss, "critic_loss");
        st.update_critics(l.grads);
        if (t % c.td3_policy_delay == 0) {
          st.set_stage("policy_loss");
          const auto q = agents::min_q(a.critics.members);
          auto pl = rule == Rule::td3 ? agents::td3_policy_loss(a.policy, q, batch)
                                      : agents::td3bc_policy_loss(a.policy, q, batch, lp.td3bc_beta);
          out.policy = st.check(pl.loss, "policy_loss");
          st.update(a.policy_opt, a.policy.params, pl.grad, "policy_loss");
        }
        break;
      }
      case Rule::awr: {
        st.set_stage("critic_loss");
        auto l = agents::sac_critic_loss(a.critics, a.policy, batch, 0.0, lp.gamma, critic_seed);
        out.critic = st.check(l.loss, "critic_loss");
        st.update_critics(l.grads);
        st.set_stage("policy_loss");
        auto pl = agents::awr_policy_loss(a.policy, agents::mean_q(a.critics.members), batch, lp.awr_temperature,
                                          lp.weight_clip, policy_seed);
        out.policy = st.check(pl.loss, "policy_loss");
        st.update(a.policy_opt, a.policy.params, pl.grad, "policy_loss");
        break;
      }
    }
    st.polyak();
  } catch (const TrainingAborted&) {
    throw;
  } catch (const NumericError& e) {
    throw TrainingAborted(t, st.stage(), e.what());
  }
  return out;
}

void log_losses(const MetricsSink& sink, bool online, std::uint64_t step, const StepLosses& l,
                const AgentCheckpoint& a) {
  if (!sink.log) return;
  const char* ph = phase_name(online);
  auto put = [&](const char* name, double v) {
    if (!std::isnan(v)) sink.log->add(sink.run_id, ph, step, name, v);
  };
  put("critic_loss", l.critic);
  put("policy_loss", l.policy);
  put("score_match_loss", l.score_match);
  put("value_loss", l.value);
  sink.log->add(sink.run_id, ph, step, "entropy_coef", std::exp(a.log_entropy_coef));
}

void log_eval(const MetricsSink& sink, bool online, std::uint64_t step, const EvalResult& e) {
  if (!sink.log) return;
  sink.log->add(sink.run_id, phase_name(online), step, "eval_return", e.mean);
  sink.log->add(sink.run_id, phase_name(online), step, "eval_stderr", e.std_error);
}

std::vector<double> clip_to_box(std::vector<double> a, const envs::EnvSpec& env) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i], env.action_low[i], env.action_high[i]);
  return a;
}

}  // namespace

EvalResult evaluate_policy(const agents::GaussianPolicy& policy, const envs::EnvSpec& env, std::size_t episodes,
                           std::uint64_t seed) {
  if (episodes == 0) throw InvalidArgument("evaluate_policy needs at least one episode");
  const envs::Policy greedy = [&](std::span<const double> s, Rng&) { return agents::mean_action(policy, s); };
  EvalResult out;
  Rng unused(0);
  for (std::size_t e = 0; e < episodes; ++e) {
    out.returns.push_back(envs::rollout(env, greedy, derive_seed(seed, e), unused).undiscounted_return);
  }
  const double n = static_cast<double>(episodes);
  for (double r : out.returns) out.mean += r / n;
  if (episodes > 1) {
    double ss = 0.0;
    for (double r : out.returns) ss += (r - out.mean) * (r - out.mean);
    out.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return out;
}

void offline_train(AgentCheckpoint& agent, const ExperimentConfig& config, const envs::Dataset& data,
                   const diffusion::ScoreModel* score, std::uint64_t seed, std::uint64_t until_step,
                   const MetricsSink& sink) {
  config.validate();
  const Rule rule = offline_rule(config.offline_alg);
  if (rule == Rule::iql && !agent.has_value_net()) throw InvalidArgument("IQL needs an agent built with a value network");
  if (rule == Rule::calql && !data.empty() && std::isnan(data.mc_return(0))) {
    throw InvalidArgument("calql needs Monte-Carlo returns in the dataset; use cql instead");
  }
  std::optional<diffusion::NoisePredictor> predictor;
  if (score) predictor = score->predictor();
  const auto env = config.env_spec();
  const std::uint64_t eval_seed = derive_seed(seed, kEvalSeedTag);
  if (agent.step == 0 && sink.log) log_eval(sink, false, 0, evaluate_policy(agent.policy, env, config.eval_episodes, eval_seed));
  while (agent.step < until_step) {
    const std::uint64_t t = ++agent.step;
    const auto batch = envs::dataset_batch(data, config.offline_batch, derive_seed(seed, t, kBatch));
    const auto losses = run_step(agent, config, rule, batch, predictor ? &*predictor : nullptr, seed, t);
    if (t % config.eval_every == 0) {
      log_losses(sink, false, t, losses, agent);
      log_eval(sink, false, t, evaluate_policy(agent.policy, env, config.eval_episodes, eval_seed));
    }
  }
}

AgentCheckpoint offline_pretrain(const ExperimentConfig& config, const envs::Dataset& data,
                                 const diffusion::ScoreModel* score, std::uint64_t seed, const MetricsSink& sink) {
  auto agent = make_agent(config, seed);
  offline_train(agent, config, data, score, seed, config.offline_steps, sink);
  return agent;
}

envs::ReplayBuffer warm_start(const agents::GaussianPolicy& policy, const envs::EnvSpec& env, std::size_t count,
                              std::uint64_t seed, std::size_t capacity) {
  if (count == 0) throw InvalidArgument("warm_start count must be >= 1");
  envs::ReplayBuffer buffer(capacity);
  Rng rng(derive_seed(seed, kWarm));
  std::size_t added = 0;
  for (std::int64_t ep = 0; added < count; ++ep) {
    auto s = envs::env_reset(env, derive_seed(seed, kWarmReset, static_cast<std::uint64_t>(ep)));
    for (std::size_t t = 0; t < env.horizon && added < count; ++t) {
      auto a = clip_to_box(agents::policy_sample(policy, agents::policy_head(policy, s), rng).action, env);
      auto res = envs::env_step(env, s, a);
      buffer.push({s, a, res.reward, res.next_state, res.done, ep, static_cast<std::int64_t>(t)});
      ++added;
      if (res.done) break;
      s = std::move(res.next_state);
    }
  }
  return buffer;
}

OnlineResult online_finetune(const AgentCheckpoint& checkpoint, const ExperimentConfig& config,
                             const envs::Dataset& data, std::uint64_t seed, const MetricsSink& sink) {
  config.validate();
  const auto env = config.env_spec();
  if (checkpoint.policy.state_dim() != env.state_dim || checkpoint.policy.action_dim() != env.action_dim ||
      checkpoint.critics.input_dim() != env.state_dim + env.action_dim) {
    throw InvalidArgument("checkpoint shapes do not match environment '" + env.name + "'");
  }
  const Rule rule = online_rule(config.online_alg);
  OnlineResult out;
  out.checkpoint = checkpoint;
  auto& a = out.checkpoint;
  reset_optimizers(a, config, optim::OptimizerKind::adam);

  auto buffer = warm_start(a.policy, env, config.warm_start_count, seed, config.replay_capacity);
  Rng explore;
  explore.set_state(a.rng_state);
  const std::uint64_t eval_seed = derive_seed(seed, kEvalSeedTag);

  auto evaluate = [&](std::uint64_t t) {
    const auto e = evaluate_policy(a.policy, env, config.eval_episodes, eval_seed);
    out.eval_steps.push_back(t);
    out.eval_returns.push_back(e.mean);
    log_eval(sink, true, t, e);
  };
  evaluate(0);

  const bool deterministic_actor = rule == Rule::td3 || rule == Rule::td3bc;
  std::int64_t episode = 0, ep_t = 0;
  auto state = envs::env_reset(env, derive_seed(seed, kEpisode, 0));
  for (std::uint64_t t = 1; t <= config.online_steps; ++t) {
    std::vector<double> act;
    const auto head = agents::policy_head(a.policy, state);
    if (deterministic_actor) {
      act = agents::mean_action(a.policy, head);
      for (std::size_t i = 0; i < act.size(); ++i) {
        act[i] += config.td3_explore_noise * 0.5 * (env.action_high[i] - env.action_low[i]) * explore.normal();
      }
    } else {
      act = agents::policy_sample(a.policy, head, explore).action;
    }
    act = clip_to_box(std::move(act), env);
    auto res = envs::env_step(env, state, act);
    buffer.push({state, act, res.reward, res.next_state, res.done, 1'000'000 + episode, ep_t});
    ++ep_t;
    if (res.done || static_cast<std::size_t>(ep_t) >= env.horizon) {
      ++episode;
      ep_t = 0;
      state = envs::env_reset(env, derive_seed(seed, kEpisode, static_cast<std::uint64_t>(episode)));
    } else {
      state = std::move(res.next_state);
    }

    const auto batch = envs::mixed_batch(data, buffer, config.online_batch, config.mix, derive_seed(seed, t, kOnlineBatch));
    ++a.step;
    const auto losses = run_step(a, config, rule, batch, nullptr, derive_seed(seed, 0x0411E), t);
    if (t % config.eval_every == 0) {
      log_losses(sink, true, t, losses, a);
      if (sink.log) sink.log->add(sink.run_id, "online", t, "buffer_size", static_cast<double>(buffer.size()));
      evaluate(t);
    }
  }
  a.rng_state = explore.state();
  out.buffer_size = buffer.size();
  out.stable_transfer = out.eval_returns.size() > 1 ? out.eval_returns[1] - out.eval_returns[0]
                                                    : std::numeric_limits<double>::quiet_NaN();
  if (sink.log && out.eval_returns.size() > 1) {
    sink.log->add(sink.run_id, "online", out.eval_steps[1], "stable_transfer", out.stable_transfer);
  }
  return out;
}

envs::Dataset make_dataset(const ExperimentConfig& config) {
  const auto env = config.env_spec();
  return envs::generate_dataset(env, envs::noisy_expert(env, config.dataset.noise_std), config.dataset.episodes,
                                config.dataset.seed);
}

diffusion::ScoreModel train_diffusion(const ExperimentConfig& config, const envs::Dataset& data, std::uint64_t seed,
                                      const MetricsSink& sink) {
  config.validate();
  const auto env = config.env_spec();
  const auto& d = config.diffusion;
  Rng rng(derive_seed(seed, kDiffusion));
  auto model = diffusion::ScoreModel::create(diffusion::cosine_schedule(d.steps), env.state_dim, env.action_dim,
                                             d.hidden, numkit::Activation::relu, d.embed_dim, rng);
  const auto samples = diffusion::diffusion_samples(data, config.rvs_enabled);
  diffusion::TrainOptions opt;
  opt.steps = d.train_steps;
  opt.batch_size = d.batch;
  opt.learning_rate = d.learning_rate;
  opt.seed = derive_seed(seed, kDiffusion, 1);
  opt.log_every = config.eval_every;
  if (sink.log) {
    opt.on_log = [&](std::size_t step, double loss) { sink.log->add(sink.run_id, "offline", step, "diffusion_loss", loss); };
  }
  diffusion::train_score_model(model, samples, opt);
  return model;
}

}  // namespace o2o::pipeline
