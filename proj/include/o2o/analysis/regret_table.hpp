#pragma once

#include <string>
#include <vector>

#include "o2o/pipeline/metrics.hpp"

namespace o2o::analysis {

struct NormalizedCell {
  std::string env;
  std::string offline_alg;
  std::string online_alg;
  double mean_regret = 0.0;
  double stderr_regret = 0.0;
  /// (mean - min) / (max - min) within the environment; 0 when max == min.
  double normalized = 0.0;
};

struct AggregateCell {
  std::string offline_alg;
  std::string online_alg;
  /// Normalized regret averaged over environments.
  double value = 0.0;
};

struct RegretTable {
  /// Sorted by (env, offline, online).
  std::vector<NormalizedCell> cells;
  /// Sorted by (offline, online).
  std::vector<AggregateCell> aggregate;

  /// Throws InvalidArgument for an unknown pair.
  double average(const std::string& offline_alg, const std::string& online_alg) const;
};

/// Min-max normalizes mean regrets per environment, pooling every offline x online
/// cell of that environment, then averages over environments. Every
/// (env, offline, online) combination must be present exactly once; otherwise
/// InvalidArgument lists the missing or repeated cells.
RegretTable aggregate_normalized_regret(const std::vector<pipeline::RegretRecord>& records);

/// "env,offline_alg,online_alg,mean_regret,stderr_regret" rows, the format of the
/// bundled per-environment fixture. Per-seed reward streams are not part of it.
std::vector<pipeline::RegretRecord> parse_regret_csv(const std::string& text);
std::string regret_records_to_csv(const std::vector<pipeline::RegretRecord>& records);

/// Per-cell raw and normalized values.
std::string cells_to_csv(const RegretTable& table);
/// "offline_alg,online_alg,normalized_regret".
std::string aggregate_to_csv(const RegretTable& table);

}  // namespace o2o::analysis
