#include "o2o/pipeline/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "o2o/error.hpp"

namespace o2o::pipeline {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void MetricsLog::add(const std::string& run_id, const std::string& phase, std::uint64_t step,
                     const std::string& metric, double value) {
  for (const auto* f : {&run_id, &phase, &metric}) {
    if (f->find_first_of(",\n") != std::string::npos) throw InvalidArgument("metric fields may not contain ',' or newlines");
  }
  if (phase != "offline" && phase != "online") throw InvalidArgument("metric phase must be 'offline' or 'online'");
  rows_.push_back({run_id, phase, step, metric, value});
}

void MetricsLog::append(const MetricsLog& other) { rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end()); }

std::vector<MetricRow> MetricsLog::select(const std::string& metric, const std::string& phase) const {
  std::vector<MetricRow> out;
  for (const auto& r : rows_) {
    if (r.metric == metric && (phase.empty() || r.phase == phase)) out.push_back(r);
  }
  return out;
}

std::string MetricsLog::to_csv() const {
  std::string out = "run_id,phase,step,metric,value\n";
  for (const auto& r : rows_) {
    out += r.run_id + "," + r.phase + "," + std::to_string(r.step) + "," + r.metric + "," + format_real(r.value) + "\n";
  }
  return out;
}

MetricsLog MetricsLog::parse_csv(const std::string& text) {
  MetricsLog log;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0, offset = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t here = offset;
    offset += line.size() + 1;
    if (lineno == 1) {
      if (line != "run_id,phase,step,metric,value") throw ParseError("unexpected metrics header", 1, 0);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw ParseError("metrics row needs 5 fields", lineno, here);
    std::uint64_t step = 0;
    double value = 0.0;
    const auto s = std::from_chars(f[2].data(), f[2].data() + f[2].size(), step);
    if (s.ec != std::errc{} || s.ptr != f[2].data() + f[2].size() || f[2].empty()) {
      throw ParseError("malformed step in metrics row", lineno, here);
    }
    const auto v = std::from_chars(f[4].data(), f[4].data() + f[4].size(), value);
    if (v.ec != std::errc{} || v.ptr != f[4].data() + f[4].size() || f[4].empty()) {
      throw ParseError("malformed value in metrics row", lineno, here);
    }
    if (f[1] != "offline" && f[1] != "online") throw ParseError("unknown phase '" + f[1] + "'", lineno, here);
    log.add(f[0], f[1], step, f[3], value);
  }
  return log;
}

double regret_of(const std::vector<double>& rewards, double r_star) {
  if (rewards.empty()) throw InvalidArgument("regret needs at least one online evaluation");
  double s = 0.0;
  for (double r : rewards) s += r_star - r;
  return s / static_cast<double>(rewards.size());
}

RegretRecord make_regret_record(std::string env, std::string offline_alg, std::string online_alg,
                                std::vector<std::vector<double>> rewards, double r_star) {
  if (rewards.empty()) throw InvalidArgument("regret record needs at least one seed");
  RegretRecord rec{std::move(env), std::move(offline_alg), std::move(online_alg), std::move(rewards), r_star, 0.0, 0.0};
  const double n = static_cast<double>(rec.rewards.size());
  std::vector<double> per_seed;
  for (const auto& r : rec.rewards) per_seed.push_back(regret_of(r, r_star));
  for (double x : per_seed) rec.mean_regret += x / n;
  if (per_seed.size() > 1) {
    double ss = 0.0;
    for (double x : per_seed) ss += (x - rec.mean_regret) * (x - rec.mean_regret);
    rec.stderr_regret = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return rec;
}

double best_reward(const std::vector<RegretRecord>& records) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& rec : records) {
    for (const auto& seed : rec.rewards) {
      for (double r : seed) best = std::max(best, r);
    }
  }
  return best;
}

}  // namespace o2o::pipeline
