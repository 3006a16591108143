#include "o2o/analysis/regret_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "o2o/error.hpp"

namespace o2o::analysis {

using pipeline::format_real;
using pipeline::RegretRecord;

double RegretTable::average(const std::string& offline_alg, const std::string& online_alg) const {
  for (const auto& c : aggregate) {
    if (c.offline_alg == offline_alg && c.online_alg == online_alg) return c.value;
  }
  throw InvalidArgument("no aggregate cell for " + offline_alg + " x " + online_alg);
}

RegretTable aggregate_normalized_regret(const std::vector<RegretRecord>& records) {
  if (records.empty()) throw InvalidArgument("no regret records to aggregate");
  std::set<std::string> envs, offs, ons;
  std::map<std::tuple<std::string, std::string, std::string>, const RegretRecord*> cell;
  std::string repeated;
  for (const auto& r : records) {
    if (!std::isfinite(r.mean_regret)) throw InvalidArgument("non-finite regret for " + r.env + "/" + r.offline_alg + "/" + r.online_alg);
    envs.insert(r.env);
    offs.insert(r.offline_alg);
    ons.insert(r.online_alg);
    if (!cell.emplace(std::tuple{r.env, r.offline_alg, r.online_alg}, &r).second) {
      repeated += " " + r.env + "/" + r.offline_alg + "/" + r.online_alg;
    }
  }
  if (!repeated.empty()) throw InvalidArgument("repeated regret cells:" + repeated);
  std::string missing;
  for (const auto& e : envs)
    for (const auto& a : offs)
      for (const auto& b : ons)
        if (!cell.count({e, a, b})) missing += " " + e + "/" + a + "/" + b;
  if (!missing.empty()) throw InvalidArgument("missing regret cells:" + missing);

  RegretTable table;
  std::map<std::pair<std::string, std::string>, double> sums;
  for (const auto& e : envs) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& a : offs)
      for (const auto& b : ons) {
        lo = std::min(lo, cell.at({e, a, b})->mean_regret);
        hi = std::max(hi, cell.at({e, a, b})->mean_regret);
      }
    for (const auto& a : offs)
      for (const auto& b : ons) {
        const auto* r = cell.at({e, a, b});
        const double z = hi > lo ? (r->mean_regret - lo) / (hi - lo) : 0.0;
        table.cells.push_back({e, a, b, r->mean_regret, r->stderr_regret, z});
        sums[{a, b}] += z;
      }
  }
  for (const auto& [k, s] : sums) table.aggregate.push_back({k.first, k.second, s / static_cast<double>(envs.size())});
  return table;
}

namespace {

double parse_real(const std::string& s, std::size_t line, std::size_t offset) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw ParseError("malformed number '" + s + "'", line, offset);
  }
  return x;
}

}  // namespace

std::vector<RegretRecord> parse_regret_csv(const std::string& text) {
  static const std::string header = "env,offline_alg,online_alg,mean_regret,stderr_regret";
  std::vector<RegretRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0, offset = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t here = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != header) throw ParseError("expected header '" + header + "'", 1, 0);
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) f.push_back(c);
    if (f.size() != 5) throw ParseError("regret row needs 5 fields", lineno, here);
    RegretRecord r;
    r.env = f[0];
    r.offline_alg = f[1];
    r.online_alg = f[2];
    r.mean_regret = parse_real(f[3], lineno, here);
    r.stderr_regret = parse_real(f[4], lineno, here);
    out.push_back(std::move(r));
  }
  if (lineno == 0) throw ParseError("empty regret table", 1, 0);
  return out;
}

std::string regret_records_to_csv(const std::vector<RegretRecord>& records) {
  std::string out = "env,offline_alg,online_alg,mean_regret,stderr_regret\n";
  for (const auto& r : records) {
    out += r.env + "," + r.offline_alg + "," + r.online_alg + "," + format_real(r.mean_regret) + "," +
           format_real(r.stderr_regret) + "\n";
  }
  return out;
}

std::string cells_to_csv(const RegretTable& table) {
  std::string out = "env,offline_alg,online_alg,mean_regret,stderr_regret,normalized_regret\n";
  for (const auto& c : table.cells) {
    out += c.env + "," + c.offline_alg + "," + c.online_alg + "," + format_real(c.mean_regret) + "," +
           format_real(c.stderr_regret) + "," + format_real(c.normalized) + "\n";
  }
  return out;
}

std::string aggregate_to_csv(const RegretTable& table) {
  std::string out = "offline_alg,online_alg,normalized_regret\n";
  for (const auto& c : table.aggregate) out += c.offline_alg + "," + c.online_alg + "," + format_real(c.value) + "\n";
  return out;
}

}  // namespace o2o::analysis
