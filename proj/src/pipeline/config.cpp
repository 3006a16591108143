#include "o2o/pipeline/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "o2o/error.hpp"

namespace o2o::pipeline {

using nlohmann::json;

std::string to_string(OfflineAlg a) {
  switch (a) {
    case OfflineAlg::smac: return "smac";
    case OfflineAlg::sac: return "sac";
    case OfflineAlg::cql: return "cql";
    case OfflineAlg::calql: return "calql";
    case OfflineAlg::iql: return "iql";
    case OfflineAlg::td3bc: return "td3bc";
  }
  return "?";
}

std::string to_string(OnlineAlg a) {
  switch (a) {
    case OnlineAlg::sac: return "sac";
    case OnlineAlg::td3: return "td3";
    case OnlineAlg::td3bc: return "td3bc";
    case OnlineAlg::awr: return "awr";
  }
  return "?";
}

OfflineAlg parse_offline_alg(std::string_view name) {
  for (auto a : {OfflineAlg::smac, OfflineAlg::sac, OfflineAlg::cql, OfflineAlg::calql, OfflineAlg::iql,
                 OfflineAlg::td3bc}) {
    if (name == to_string(a)) return a;
  }
  throw ConfigError("unknown offline_alg '" + std::string(name) + "' (smac, sac, cql, calql, iql, td3bc)");
}

OnlineAlg parse_online_alg(std::string_view name) {
  for (auto a : {OnlineAlg::sac, OnlineAlg::td3, OnlineAlg::td3bc, OnlineAlg::awr}) {
    if (name == to_string(a)) return a;
  }
  throw ConfigError("unknown online_alg '" + std::string(name) + "' (sac, td3, td3bc, awr)");
}

double ExperimentConfig::target_entropy() const {
  return loss.target_entropy_scale * static_cast<double>(env_spec().action_dim);
}

void ExperimentConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  try {
    (void)envs::make_env(env);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("env: ") + e.what());
  }
  positive(offline_batch, "offline_batch");
  positive(online_batch, "online_batch");
  if (online_batch < 2) throw ConfigError("online_batch must be >= 2");
  positive(warm_start_count, "warm_start_count");
  positive(eval_every, "eval_every");
  positive(eval_episodes, "eval_episodes");
  positive(td3_policy_delay, "td3_policy_delay");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (!(mix >= 0.0 && mix <= 1.0)) throw ConfigError("mix must lie in [0, 1]");
  if (!(polyak > 0.0 && polyak <= 1.0)) throw ConfigError("polyak must lie in (0, 1]");
  if (!(initial_entropy_coef > 0.0) || !std::isfinite(initial_entropy_coef)) {
    throw ConfigError("initial_entropy_coef must be positive");
  }
  if (!(td3_explore_noise >= 0.0)) throw ConfigError("td3_explore_noise must be >= 0");
  try {
    loss.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("loss: ") + e.what());
  }
  if (!std::isfinite(network.alpha_init_bias)) throw ConfigError("network.alpha_init_bias must be finite");
  if (network.ensemble_size < 2) throw ConfigError("network.ensemble_size must be >= 2");
  for (const auto* h : {&network.critic_hidden, &network.policy_hidden, &network.alpha_hidden,
                        &network.value_hidden, &diffusion.hidden}) {
    for (std::size_t w : *h) positive(w, "hidden widths");
  }
  for (double r : {lr.critic, lr.policy, lr.alpha, lr.value, lr.entropy, lr.muon_scale, diffusion.learning_rate}) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("learning rates must be positive and finite");
  }
  positive(dataset.episodes, "dataset.episodes");
  if (!(dataset.noise_std >= 0.0)) throw ConfigError("dataset.noise_std must be >= 0");
  if (diffusion.steps < 2) throw ConfigError("diffusion.steps must be >= 2");
  positive(diffusion.embed_dim, "diffusion.embed_dim");
  positive(diffusion.batch, "diffusion.batch");
}

json to_json(const ExperimentConfig& c) {
  const auto& l = c.loss;
  const auto& n = c.network;
  return json{
      {"env", c.env},
      {"offline_alg", to_string(c.offline_alg)},
      {"online_alg", to_string(c.online_alg)},
      {"optimizer", optim::to_string(c.optimizer)},
      {"offline_steps", c.offline_steps},
      {"online_steps", c.online_steps},
      {"offline_batch", c.offline_batch},
      {"online_batch", c.online_batch},
      {"warm_start_count", c.warm_start_count},
      {"mix", c.mix},
      {"eval_every", c.eval_every},
      {"eval_episodes", c.eval_episodes},
      {"seeds", c.seeds},
      {"rvs_enabled", c.rvs_enabled},
      {"replay_capacity", c.replay_capacity},
      {"polyak", c.polyak},
      {"initial_entropy_coef", c.initial_entropy_coef},
      {"td3_policy_delay", c.td3_policy_delay},
      {"td3_explore_noise", c.td3_explore_noise},
      {"loss",
       {{"gamma", l.gamma},
        {"kappa", l.kappa},
        {"cql_alpha", l.cql_alpha},
        {"expectile", l.expectile},
        {"iql_temperature", l.iql_temperature},
        {"awr_temperature", l.awr_temperature},
        {"td3bc_beta", l.td3bc_beta},
        {"target_entropy_scale", l.target_entropy_scale},
        {"td3_noise", l.td3_noise},
        {"td3_noise_clip", l.td3_noise_clip},
        {"weight_clip", l.weight_clip},
        {"score_w", l.score_w}}},
      {"network",
       {{"critic_hidden", n.critic_hidden},
        {"policy_hidden", n.policy_hidden},
        {"alpha_hidden", n.alpha_hidden},
        {"value_hidden", n.value_hidden},
        {"critic_activation", numkit::to_string(n.critic_activation)},
        {"policy_activation", numkit::to_string(n.policy_activation)},
        {"alpha_activation", numkit::to_string(n.alpha_activation)},
        {"value_activation", numkit::to_string(n.value_activation)},
        {"ensemble_size", n.ensemble_size},
        {"alpha_init_bias", n.alpha_init_bias}}},
      {"lr",
       {{"critic", c.lr.critic},
        {"policy", c.lr.policy},
        {"alpha", c.lr.alpha},
        {"value", c.lr.value},
        {"entropy", c.lr.entropy},
        {"muon_scale", c.lr.muon_scale}}},
      {"dataset",
       {{"episodes", c.dataset.episodes}, {"noise_std", c.dataset.noise_std}, {"seed", c.dataset.seed}}},
      {"diffusion",
       {{"steps", c.diffusion.steps},
        {"hidden", c.diffusion.hidden},
        {"embed_dim", c.diffusion.embed_dim},
        {"train_steps", c.diffusion.train_steps},
        {"batch", c.diffusion.batch},
        {"learning_rate", c.diffusion.learning_rate}}},
  };
}

namespace {

void merge_strict(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigError("config" + (path.empty() ? "" : " field '" + path + "'") + " must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

bool is_count(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

class Reader {
 public:
  Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {}

  std::size_t count(const char* k) const {
    const json& v = at(k);
    if (!is_count(v)) throw ConfigError("'" + name(k) + "' must be a non-negative integer");
    return v.get<std::size_t>();
  }
  double real(const char* k) const {
    const json& v = at(k);
    if (!v.is_number()) throw ConfigError("'" + name(k) + "' must be a number");
    return v.get<double>();
  }
  bool flag(const char* k) const {
    const json& v = at(k);
    if (!v.is_boolean()) throw ConfigError("'" + name(k) + "' must be true or false");
    return v.get<bool>();
  }
  std::string text(const char* k) const {
    const json& v = at(k);
    if (!v.is_string()) throw ConfigError("'" + name(k) + "' must be a string");
    return v.get<std::string>();
  }
  std::vector<std::size_t> counts(const char* k) const {
    const json& v = at(k);
    if (!v.is_array()) throw ConfigError("'" + name(k) + "' must be an array of non-negative integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      if (!is_count(e)) throw ConfigError("'" + name(k) + "' must be an array of non-negative integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }
  numkit::Activation activation(const char* k) const {
    try {
      return numkit::parse_activation(text(k));
    } catch (const InvalidArgument& e) {
      throw ConfigError("'" + name(k) + "': " + e.what());
    }
  }
  Reader sub(const char* k) const { return Reader(at(k), name(k)); }

 private:
  const json& at(const char* k) const { return j_.at(k); }
  std::string name(const char* k) const { return prefix_.empty() ? k : prefix_ + "." + k; }

  const json& j_;
  std::string prefix_;
};

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  json full = to_json(ExperimentConfig{});
  merge_strict(full, doc, "");
  const Reader r(full, "");
  ExperimentConfig c;
  c.env = r.text("env");
  c.offline_alg = parse_offline_alg(r.text("offline_alg"));
  c.online_alg = parse_online_alg(r.text("online_alg"));
  try {
    c.optimizer = optim::parse_optimizer(r.text("optimizer"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
  c.offline_steps = r.count("offline_steps");
  c.online_steps = r.count("online_steps");
  c.offline_batch = r.count("offline_batch");
  c.online_batch = r.count("online_batch");
  c.warm_start_count = r.count("warm_start_count");
  c.mix = r.real("mix");
  c.eval_every = r.count("eval_every");
  c.eval_episodes = r.count("eval_episodes");
  c.seeds.clear();
  for (std::size_t s : r.counts("seeds")) c.seeds.push_back(s);
  c.rvs_enabled = r.flag("rvs_enabled");
  c.replay_capacity = r.count("replay_capacity");
  c.polyak = r.real("polyak");
  c.initial_entropy_coef = r.real("initial_entropy_coef");
  c.td3_policy_delay = r.count("td3_policy_delay");
  c.td3_explore_noise = r.real("td3_explore_noise");

  const Reader l = r.sub("loss");
  c.loss.gamma = l.real("gamma");
  c.loss.kappa = l.real("kappa");
  c.loss.cql_alpha = l.real("cql_alpha");
  c.loss.expectile = l.real("expectile");
  c.loss.iql_temperature = l.real("iql_temperature");
  c.loss.awr_temperature = l.real("awr_temperature");
  c.loss.td3bc_beta = l.real("td3bc_beta");
  c.loss.target_entropy_scale = l.real("target_entropy_scale");
  c.loss.td3_noise = l.real("td3_noise");
  c.loss.td3_noise_clip = l.real("td3_noise_clip");
  c.loss.weight_clip = l.real("weight_clip");
  c.loss.score_w = l.real("score_w");

  const Reader n = r.sub("network");
  c.network.critic_hidden = n.counts("critic_hidden");
  c.network.policy_hidden = n.counts("policy_hidden");
  c.network.alpha_hidden = n.counts("alpha_hidden");
  c.network.value_hidden = n.counts("value_hidden");
  c.network.critic_activation = n.activation("critic_activation");
  c.network.policy_activation = n.activation("policy_activation");
  c.network.alpha_activation = n.activation("alpha_activation");
  c.network.value_activation = n.activation("value_activation");
  c.network.ensemble_size = n.count("ensemble_size");
  c.network.alpha_init_bias = n.real("alpha_init_bias");

  const Reader lr = r.sub("lr");
  c.lr.critic = lr.real("critic");
  c.lr.policy = lr.real("policy");
  c.lr.alpha = lr.real("alpha");
  c.lr.value = lr.real("value");
  c.lr.entropy = lr.real("entropy");
  c.lr.muon_scale = lr.real("muon_scale");

  const Reader d = r.sub("dataset");
  c.dataset.episodes = d.count("episodes");
  c.dataset.noise_std = d.real("noise_std");
  c.dataset.seed = d.count("seed");

  const Reader df = r.sub("diffusion");
  c.diffusion.steps = df.count("steps");
  c.diffusion.hidden = df.counts("hidden");
  c.diffusion.embed_dim = df.count("embed_dim");
  c.diffusion.train_steps = df.count("train_steps");
  c.diffusion.batch = df.count("batch");
  c.diffusion.learning_rate = df.real("learning_rate");

  c.validate();
  return c;
}

json apply_overrides(json doc, const std::vector<std::string>& overrides) {
  const json defaults = to_json(ExperimentConfig{});
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + ov + "' is not of the form key=value");
    const std::string path = ov.substr(0, eq);
    const std::string text = ov.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    // Walk the defaults to reject unknown keys, creating objects in doc as needed.
    const json* schema = &defaults;
    json* slot = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!schema->is_object() || !schema->contains(key)) throw ConfigError("unknown config key '" + path + "'");
      schema = &(*schema)[key];
      if (!slot->is_object()) *slot = json::object();
      slot = &(*slot)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (schema->is_object()) throw ConfigError("override '" + path + "' names a section, not a field");
    *slot = std::move(value);
  }
  return doc;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    doc = json::parse(ss.str(), nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  }
  return config_from_json(apply_overrides(std::move(doc), overrides));
}

}  // namespace o2o::pipeline
