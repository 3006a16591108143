#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "o2o/agents/networks.hpp"
#include "o2o/agents/policy.hpp"
#include "o2o/optim/optim.hpp"
#include "o2o/pipeline/config.hpp"

namespace o2o::pipeline {

/// Everything a training loop needs to continue from a given step.
struct AgentCheckpoint {
  std::uint64_t step = 0;
  agents::GaussianPolicy policy;
  agents::CriticEnsemble critics;
  /// alpha_psi(s) of the score-matching regularizer.
  numkit::ParamVector alpha_net;
  /// V_psi(s); empty unless the agent was built for IQL.
  numkit::ParamVector value_net;
  /// log of the SAC entropy coefficient.
  double log_entropy_coef = 0.0;
  std::vector<optim::OptState> critic_opt;
  optim::OptState policy_opt;
  optim::OptState alpha_opt;
  optim::OptState value_opt;
  optim::OptState entropy_opt;
  /// Serialized state of the exploration RNG.
  std::string rng_state;

  bool has_value_net() const { return value_net.size() > 0; }
  friend bool operator==(const AgentCheckpoint&, const AgentCheckpoint&) = default;
};

/// Fresh agent for the offline phase. Each network draws its initialization
/// from its own stream derived from seed, so adding or removing a network leaves
/// the others unchanged.
AgentCheckpoint make_agent(const ExperimentConfig& config, std::uint64_t seed);

/// Optimizer state of the given kind and learning rate for one network
/// (Muon learning rates are multiplied by config.lr.muon_scale).
optim::OptState make_opt(const ExperimentConfig& config, optim::OptimizerKind kind, std::size_t n, double lr);

/// Replaces every optimizer state with a fresh one of the given kind.
void reset_optimizers(AgentCheckpoint& agent, const ExperimentConfig& config, optim::OptimizerKind kind);

inline constexpr char kCheckpointMagic[9] = "O2OCKPT\x01";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const AgentCheckpoint& ckpt);
/// Throws ParseError on bad magic or truncation and ConfigError on a version
/// mismatch (the message names both versions).
AgentCheckpoint deserialize_checkpoint(const std::string& bytes);

/// Writes through a temporary file and a rename.
void save_checkpoint(const AgentCheckpoint& ckpt, const std::string& path);
AgentCheckpoint load_checkpoint(const std::string& path);

}  // namespace o2o::pipeline
