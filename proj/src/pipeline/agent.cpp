#include "o2o/pipeline/agent.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>

#include "o2o/binary_io.hpp"
#include "o2o/error.hpp"

namespace o2o::pipeline {

namespace {

enum : std::uint64_t { kInitPolicy = 0x9011C7, kInitCritic = 0xC817, kInitAlpha = 0xA1FA, kInitValue = 0x7A1E,
                       kInitExplore = 0xE791 };

void write_params(BinaryWriter& w, const numkit::ParamVector& p) {
  const auto& spec = p.spec();
  w.u64(spec.widths.size());
  for (std::size_t x : spec.widths) w.u64(x);
  w.u8(static_cast<std::uint8_t>(spec.activation));
  w.u8(static_cast<std::uint8_t>(spec.output));
  w.f64s(p.values());
}

numkit::ParamVector read_params(BinaryReader& r) {
  numkit::MlpSpec spec;
  const std::uint64_t n = r.u64();
  if (n > 64) throw ParseError("implausible layer count in checkpoint", 0, r.position());
  for (std::uint64_t i = 0; i < n; ++i) spec.widths.push_back(r.u64());
  const auto act = r.u8();
  const auto out = r.u8();
  if (act > 1 || out > 2) throw ParseError("unknown activation or output code in checkpoint", 0, r.position());
  spec.activation = static_cast<numkit::Activation>(act);
  spec.output = static_cast<numkit::OutputTransform>(out);
  auto values = r.f64s();
  if (n == 0) {
    if (!values.empty()) throw ParseError("values stored for an empty network", 0, r.position());
    return {};
  }
  try {
    spec.validate();
    return numkit::ParamVector(spec, std::move(values));
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("inconsistent network in checkpoint: ") + e.what(), 0, r.position());
  }
}

void write_opt(BinaryWriter& w, const optim::OptState& s) {
  w.u8(static_cast<std::uint8_t>(s.kind));
  w.u64(s.step_count);
  w.f64(s.learning_rate);
  w.f64(s.beta1);
  w.f64(s.beta2);
  w.f64(s.eps);
  w.f64(s.momentum);
  w.u8(s.nesterov ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(s.ns_iterations));
  w.f64s(s.m);
  w.f64s(s.v);
}

optim::OptState read_opt(BinaryReader& r) {
  optim::OptState s;
  const auto kind = r.u8();
  if (kind > 1) throw ParseError("unknown optimizer code in checkpoint", 0, r.position());
  s.kind = static_cast<optim::OptimizerKind>(kind);
  s.step_count = r.u64();
  s.learning_rate = r.f64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.eps = r.f64();
  s.momentum = r.f64();
  s.nesterov = r.u8() != 0;
  s.ns_iterations = static_cast<int>(r.u32());
  s.m = r.f64s();
  s.v = r.f64s();
  return s;
}

}  // namespace

optim::OptState make_opt(const ExperimentConfig& config, optim::OptimizerKind kind, std::size_t n, double lr) {
  return optim::OptState::make(kind, n, kind == optim::OptimizerKind::muon ? lr * config.lr.muon_scale : lr);
}

void reset_optimizers(AgentCheckpoint& a, const ExperimentConfig& config, optim::OptimizerKind kind) {
  a.critic_opt.clear();
  for (const auto& m : a.critics.members) a.critic_opt.push_back(make_opt(config, kind, m.size(), config.lr.critic));
  a.policy_opt = make_opt(config, kind, a.policy.params.size(), config.lr.policy);
  a.alpha_opt = make_opt(config, kind, a.alpha_net.size(), config.lr.alpha);
  a.value_opt = make_opt(config, kind, a.value_net.size(), config.lr.value);
  // The entropy coefficient is a single scalar; Adam regardless of the network optimizer.
  a.entropy_opt = optim::OptState::adam(1, config.lr.entropy);
}

AgentCheckpoint make_agent(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const auto env = config.env_spec();
  const auto& net = config.network;
  AgentCheckpoint a;
  {
    Rng rng(derive_seed(seed, kInitPolicy));
    const bool squash = config.offline_alg != OfflineAlg::iql;
    a.policy = agents::GaussianPolicy::create(env.state_dim, env.action_low, env.action_high, net.policy_hidden,
                                              net.policy_activation, squash, rng);
  }
  {
    Rng rng(derive_seed(seed, kInitCritic));
    a.critics = agents::CriticEnsemble::create(net.ensemble_size, env.state_dim, env.action_dim, net.critic_hidden,
                                               net.critic_activation, rng);
  }
  {
    Rng rng(derive_seed(seed, kInitAlpha));
    a.alpha_net = agents::make_state_net(env.state_dim, net.alpha_hidden, net.alpha_activation, rng);
    a.alpha_net[a.alpha_net.size() - 1] = net.alpha_init_bias;
  }
  if (config.offline_alg == OfflineAlg::iql) {
    Rng rng(derive_seed(seed, kInitValue));
    a.value_net = agents::make_state_net(env.state_dim, net.value_hidden, net.value_activation, rng);
  }
  a.log_entropy_coef = std::log(config.initial_entropy_coef);
  reset_optimizers(a, config, config.optimizer);
  a.rng_state = Rng(derive_seed(seed, kInitExplore)).state();
  return a;
}

std::string serialize_checkpoint(const AgentCheckpoint& c) {
  BinaryWriter w;
  w.bytes(kCheckpointMagic, 8);
  w.u32(kCheckpointVersion);
  w.u64(c.step);
  write_params(w, c.policy.params);
  w.f64s(c.policy.action_low);
  w.f64s(c.policy.action_high);
  w.u8(c.policy.squash ? 1 : 0);
  w.u64(c.critics.size());
  for (std::size_t j = 0; j < c.critics.size(); ++j) {
    write_params(w, c.critics.members[j]);
    write_params(w, c.critics.targets[j]);
  }
  write_params(w, c.alpha_net);
  write_params(w, c.value_net);
  w.f64(c.log_entropy_coef);
  w.u64(c.critic_opt.size());
  for (const auto& s : c.critic_opt) write_opt(w, s);
  write_opt(w, c.policy_opt);
  write_opt(w, c.alpha_opt);
  write_opt(w, c.value_opt);
  write_opt(w, c.entropy_opt);
  w.str(c.rng_state);
  return w.data();
}

AgentCheckpoint deserialize_checkpoint(const std::string& bytes) {
  BinaryReader r(bytes);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) throw ParseError("not a checkpoint file (bad magic)", 0, 0);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint version " + std::to_string(version) + " is not supported (this build reads version " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  AgentCheckpoint c;
  c.step = r.u64();
  c.policy.params = read_params(r);
  c.policy.action_low = r.f64s();
  c.policy.action_high = r.f64s();
  c.policy.squash = r.u8() != 0;
  const std::uint64_t members = r.u64();
  if (members > 1024) throw ParseError("implausible ensemble size in checkpoint", 0, r.position());
  for (std::uint64_t j = 0; j < members; ++j) {
    c.critics.members.push_back(read_params(r));
    c.critics.targets.push_back(read_params(r));
  }
  c.alpha_net = read_params(r);
  c.value_net = read_params(r);
  c.log_entropy_coef = r.f64();
  const std::uint64_t opts = r.u64();
  if (opts != members) throw ParseError("critic optimizer count does not match the ensemble", 0, r.position());
  for (std::uint64_t j = 0; j < opts; ++j) c.critic_opt.push_back(read_opt(r));
  c.policy_opt = read_opt(r);
  c.alpha_opt = read_opt(r);
  c.value_opt = read_opt(r);
  c.entropy_opt = read_opt(r);
  c.rng_state = r.str();
  if (!r.at_end()) throw ParseError("trailing bytes after checkpoint", 0, r.position());
  try {
    c.policy.validate();
    c.critics.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("inconsistent checkpoint: ") + e.what(), 0, 0);
  }
  return c;
}

void save_checkpoint(const AgentCheckpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".partial";
  write_file(tmp, serialize_checkpoint(ckpt));
  std::filesystem::rename(tmp, path);
}

AgentCheckpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace o2o::pipeline
