#include "o2o/envs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "o2o/error.hpp"

namespace o2o::envs {

namespace {

using nlohmann::json;

bool is_builtin(const std::string& name) {
  const auto names = builtin_env_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

bool trajectory_success(const EnvSpec& env, const Trajectory& traj) {
  if (traj.transitions.empty()) return false;
  const Transition& last = traj.transitions.back();
  if (is_builtin(env.name)) return at_goal(env, last.s2);
  return last.done;
}

void append_number(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void append_array(std::string& out, std::span<const double> v) {
  out += '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    append_number(out, v[i]);
  }
  out += ']';
}

std::vector<double> read_vector(const json& j, const char* key, std::size_t expected, std::size_t line,
                                std::size_t offset) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line, offset);
  const json& arr = j.at(key);
  if (!arr.is_array()) throw ParseError(std::string("field '") + key + "' is not an array", line, offset);
  std::vector<double> v;
  for (const auto& x : arr) {
    if (!x.is_number()) throw ParseError(std::string("non-numeric entry in '") + key + "'", line, offset);
    v.push_back(x.get<double>());
  }
  if (v.size() != expected) {
    throw InvalidArgument(std::string("field '") + key + "' has " + std::to_string(v.size()) +
                          " entries but the header declares " + std::to_string(expected) + " (line " +
                          std::to_string(line) + ")");
  }
  return v;
}

}  // namespace

void compute_returns(Trajectory& traj, double gamma) {
  const std::size_t n = traj.transitions.size();
  traj.mc_returns.assign(n, 0.0);
  double next = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    next = traj.transitions[i].r + gamma * next;
    traj.mc_returns[i] = next;
  }
  traj.discounted_return = n ? traj.mc_returns[0] : 0.0;
}

double trajectory_outcome(const EnvSpec& env, const Trajectory& traj) {
  if (env.reward_kind == RewardKind::sparse_binary) return traj.success ? 1.0 : 0.0;
  return traj.discounted_return;
}

std::vector<double> Dataset::normalize_outcomes(std::span<const double> outcomes) {
  std::vector<double> w(outcomes.size(), 1.0);
  if (outcomes.empty()) return w;
  const auto [lo, hi] = std::minmax_element(outcomes.begin(), outcomes.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return w;
  for (std::size_t i = 0; i < outcomes.size(); ++i) w[i] = (outcomes[i] - *lo) / range;
  return w;
}

Dataset::Dataset(EnvSpec env, std::vector<Trajectory> trajectories)
    : env_(std::move(env)), trajectories_(std::move(trajectories)) {
  std::vector<double> outcomes;
  for (std::size_t k = 0; k < trajectories_.size(); ++k) {
    const auto& traj = trajectories_[k];
    if (traj.mc_returns.size() != traj.transitions.size()) {
      throw InvalidArgument("trajectory " + std::to_string(k) + " mc_returns length mismatch");
    }
    for (const auto& tr : traj.transitions) {
      if (tr.s.size() != env_.state_dim || tr.s2.size() != env_.state_dim || tr.a.size() != env_.action_dim) {
        throw InvalidArgument("transition dims do not match env '" + env_.name + "'");
      }
    }
    outcomes.push_back(trajectory_outcome(env_, traj));
  }
  const std::vector<double> per_traj = normalize_outcomes(outcomes);
  for (std::size_t k = 0; k < trajectories_.size(); ++k) {
    for (std::size_t t = 0; t < trajectories_[k].transitions.size(); ++t) {
      index_.emplace_back(k, t);
      w_labels_.push_back(per_traj[k]);
    }
  }
}

const Transition& Dataset::transition(std::size_t i) const {
  const auto [k, t] = index_.at(i);
  return trajectories_[k].transitions[t];
}

double Dataset::mc_return(std::size_t i) const {
  const auto [k, t] = index_.at(i);
  return trajectories_[k].mc_returns[t];
}

Dataset generate_dataset(const EnvSpec& env, const Policy& behavior, std::size_t n_trajectories,
                         std::uint64_t seed) {
  if (n_trajectories < 1) throw InvalidArgument("n_trajectories must be >= 1");
  env.validate();
  Rng rng(derive_seed(seed, 0xDA7A));
  std::vector<Trajectory> trajs;
  for (std::size_t i = 0; i < n_trajectories; ++i) {
    Rollout ro = rollout(env, behavior, derive_seed(seed, 0x7E5E7, i), rng);
    Trajectory traj;
    for (std::size_t t = 0; t < ro.steps.size(); ++t) {
      auto& st = ro.steps[t];
      traj.transitions.push_back({std::move(st.s), std::move(st.a), st.r, std::move(st.s2), st.done,
                                  static_cast<std::int64_t>(i), static_cast<std::int64_t>(t)});
    }
    compute_returns(traj, env.gamma);
    traj.success = ro.success;
    trajs.push_back(std::move(traj));
  }
  return Dataset(env, std::move(trajs));
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  const EnvSpec& env = data.env();
  json header = {{"format", "o2olab-dataset"},
                 {"version", 1},
                 {"env", env.name},
                 {"state_dim", env.state_dim},
                 {"action_dim", env.action_dim},
                 {"gamma", env.gamma},
                 {"horizon", env.horizon},
                 {"action_low", env.action_low},
                 {"action_high", env.action_high},
                 {"count", data.num_transitions()}};
  std::string out = header.dump() + "\n";
  for (const auto& traj : data.trajectories()) {
    for (std::size_t t = 0; t < traj.transitions.size(); ++t) {
      const Transition& tr = traj.transitions[t];
      out += "{\"s\":";
      append_array(out, tr.s);
      out += ",\"a\":";
      append_array(out, tr.a);
      out += ",\"r\":";
      append_number(out, tr.r);
      out += ",\"s2\":";
      append_array(out, tr.s2);
      out += ",\"done\":";
      out += tr.done ? "true" : "false";
      out += ",\"traj\":" + std::to_string(tr.traj) + ",\"t\":" + std::to_string(tr.t) + ",\"mc\":";
      append_number(out, traj.mc_returns[t]);
      out += "}\n";
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot open '" + path.string() + "' for writing");
  f << out;
  if (!f) throw InvalidArgument("failed writing '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot open dataset '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();

  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string& line, std::size_t& start) -> bool {
    if (pos >= text.size()) return false;
    start = pos;
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      line = text.substr(pos);
      pos = text.size();
    } else {
      line = text.substr(pos, nl - pos);
      pos = nl + 1;
    }
    ++line_no;
    return true;
  };
  auto parse = [&](const std::string& line, std::size_t start) {
    try {
      return json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no, start + e.byte - 1);
    }
  };

  std::string line;
  std::size_t start = 0;
  if (!next_line(line, start)) throw ParseError("empty dataset file", 0, 0);
  const json header = parse(line, start);
  if (!header.is_object() || !header.contains("env") || !header.contains("state_dim") ||
      !header.contains("action_dim") || !header.contains("gamma") || !header.contains("count")) {
    throw ParseError("header must be an object with env, state_dim, action_dim, gamma, count", line_no, start);
  }
  const std::string name = header.at("env").get<std::string>();
  const auto state_dim = header.at("state_dim").get<std::size_t>();
  const auto action_dim = header.at("action_dim").get<std::size_t>();
  const auto count = header.at("count").get<std::size_t>();

  EnvSpec env;
  if (is_builtin(name)) {
    env = make_env(name);
    if (env.state_dim != state_dim || env.action_dim != action_dim) {
      throw InvalidArgument("header dims disagree with built-in env '" + name + "'");
    }
  } else {
    env.name = name;
    env.state_dim = state_dim;
    env.action_dim = action_dim;
    env.action_low = header.value("action_low", std::vector<double>(action_dim, -1.0));
    env.action_high = header.value("action_high", std::vector<double>(action_dim, 1.0));
    env.state_low.assign(state_dim, -std::numeric_limits<double>::infinity());
    env.state_high.assign(state_dim, std::numeric_limits<double>::infinity());
    env.init_low.assign(state_dim, 0.0);
    env.init_high.assign(state_dim, 0.0);
    env.horizon = header.value("horizon", std::size_t{1000});
    env.reward_bound = std::numeric_limits<double>::infinity();
  }
  env.gamma = header.at("gamma").get<double>();
  env.validate();

  std::vector<Trajectory> trajs;
  std::vector<std::vector<double>> mc_from_file;
  bool all_have_mc = true;
  std::size_t records = 0;
  while (next_line(line, start)) {
    if (line.empty()) continue;
    const json rec = parse(line, start);
    if (!rec.is_object()) throw ParseError("record is not a JSON object", line_no, start);
    for (const char* key : {"r", "done", "traj", "t"}) {
      if (!rec.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line_no, start);
    }
    Transition tr;
    tr.s = read_vector(rec, "s", state_dim, line_no, start);
    tr.a = read_vector(rec, "a", action_dim, line_no, start);
    tr.s2 = read_vector(rec, "s2", state_dim, line_no, start);
    if (!rec.at("r").is_number() || !rec.at("done").is_boolean() || !rec.at("traj").is_number_integer() ||
        !rec.at("t").is_number_integer()) {
      throw ParseError("field of wrong type", line_no, start);
    }
    tr.r = rec.at("r").get<double>();
    tr.done = rec.at("done").get<bool>();
    tr.traj = rec.at("traj").get<std::int64_t>();
    tr.t = rec.at("t").get<std::int64_t>();
    if (trajs.empty() || trajs.back().transitions.back().traj != tr.traj) {
      trajs.emplace_back();
      mc_from_file.emplace_back();
    }
    if (rec.contains("mc")) {
      if (!rec.at("mc").is_number()) throw ParseError("field 'mc' is not a number", line_no, start);
      mc_from_file.back().push_back(rec.at("mc").get<double>());
    } else {
      all_have_mc = false;
    }
    trajs.back().transitions.push_back(std::move(tr));
    ++records;
  }
  if (records != count) {
    throw ParseError("header declares " + std::to_string(count) + " records but the file holds " +
                         std::to_string(records) + " (truncated?)",
                     line_no, text.size());
  }
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    auto& traj = trajs[k];
    if (all_have_mc) {
      traj.mc_returns = std::move(mc_from_file[k]);
      traj.discounted_return = traj.mc_returns.empty() ? 0.0 : traj.mc_returns[0];
    } else {
      compute_returns(traj, env.gamma);
    }
    traj.success = trajectory_success(env, traj);
  }
  return Dataset(env, std::move(trajs));
}

bool has_mc_returns(const Batch& batch) {
  return std::all_of(batch.begin(), batch.end(), [](const Sample& s) { return !std::isnan(s.mc); });
}

}  // namespace o2o::envs
