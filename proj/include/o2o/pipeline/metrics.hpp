#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace o2o::pipeline {

struct MetricRow {
  std::string run_id;
  /// "offline" or "online".
  std::string phase;
  std::uint64_t step = 0;
  std::string metric;
  double value = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

/// Round-trip decimal rendering used in every CSV this project writes.
std::string format_real(double v);

class MetricsLog {
 public:
  void add(const std::string& run_id, const std::string& phase, std::uint64_t step, const std::string& metric,
           double value);
  const std::vector<MetricRow>& rows() const noexcept { return rows_; }
  void append(const MetricsLog& other);

  /// Rows of one metric, in insertion order.
  std::vector<MetricRow> select(const std::string& metric, const std::string& phase = "") const;

  /// Header "run_id,phase,step,metric,value" then one line per row.
  std::string to_csv() const;
  static MetricsLog parse_csv(const std::string& text);

 private:
  std::vector<MetricRow> rows_;
};

/// Mean regret of one (env, offline, online) cell over seeds.
struct RegretRecord {
  std::string env;
  std::string offline_alg;
  std::string online_alg;
  /// Per seed, the mean eval rewards R_t at the online evaluation points t = 1..T.
  std::vector<std::vector<double>> rewards;
  double r_star = 0.0;
  double mean_regret = 0.0;
  /// Standard error of the per-seed regrets (0 for a single seed).
  double stderr_regret = 0.0;
};

/// (1/T) sum_t (r_star - R_t).
double regret_of(const std::vector<double>& rewards, double r_star);

/// Fills mean_regret and stderr_regret from rewards and r_star.
RegretRecord make_regret_record(std::string env, std::string offline_alg, std::string online_alg,
                                std::vector<std::vector<double>> rewards, double r_star);

/// Largest reward in any record's stream; the R* shared by one environment.
double best_reward(const std::vector<RegretRecord>& records);

}  // namespace o2o::pipeline
