#include "o2o/analysis/landscape.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "o2o/error.hpp"
#include "o2o/pipeline/metrics.hpp"
#include "o2o/pipeline/training.hpp"

namespace o2o::analysis {

using pipeline::format_real;

ParamVector lerp_params(const ParamVector& a, const ParamVector& b, double t) {
  if (!a.same_shape(b)) throw InvalidArgument("interpolation endpoints have different shapes");
  ParamVector out = a;
  auto o = out.values();
  auto bv = b.values();
  // Written per coordinate so that t = 0 and t = 1 reproduce the endpoints bit for bit.
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = t == 0.0 ? o[i] : t == 1.0 ? bv[i] : (1.0 - t) * o[i] + t * bv[i];
  return out;
}

std::vector<CurvePoint> interpolate_eval(const agents::GaussianPolicy& offline, const agents::GaussianPolicy& online,
                                         const std::vector<double>& ts, const envs::EnvSpec& env,
                                         std::size_t episodes, std::uint64_t seed) {
  if (!offline.params.same_shape(online.params) || offline.action_low != online.action_low ||
      offline.action_high != online.action_high || offline.squash != online.squash) {
    throw InvalidArgument("interpolation endpoints are different actors");
  }
  std::vector<CurvePoint> out;
  out.reserve(ts.size());
  for (double t : ts) {
    if (!std::isfinite(t)) throw InvalidArgument("interpolation coordinate must be finite");
    agents::GaussianPolicy p = offline;
    p.params = lerp_params(offline.params, online.params, t);
    const auto e = pipeline::evaluate_policy(p, env, episodes, seed);
    out.push_back({t, e.mean, e.std_error});
  }
  return out;
}

PlaneBasis plane_basis(const ParamVector& theta1, const ParamVector& theta2, const ParamVector& theta3) {
  if (!theta1.same_shape(theta2) || !theta1.same_shape(theta3)) throw InvalidArgument("plane points have different shapes");
  PlaneBasis b;
  b.origin = theta1;
  b.u = theta2;
  b.u -= theta1;
  ParamVector v = theta3;
  v -= theta1;
  const double uu = numkit::dot(b.u, b.u);
  const double vv = numkit::dot(v, v);
  if (!(uu > 0.0)) throw InvalidArgument("plane basis: theta_2 equals theta_1");
  if (!(vv > 0.0)) throw InvalidArgument("plane basis: theta_3 equals theta_1");
  const double uv = numkit::dot(b.u, v);
  b.input_cosine = uv / std::sqrt(uu * vv);
  if (std::abs(b.input_cosine) > 1.0 - 1e-9) {
    throw InvalidArgument("plane basis: directions are collinear (cosine " + format_real(b.input_cosine) + ")");
  }
  v.axpy(-uv / uu, b.u);
  // A second projection pass removes the rounding left by the first.
  v.axpy(-numkit::dot(b.u, v) / uu, b.u);
  b.v = std::move(v);
  b.u_norm = std::sqrt(uu);
  b.v_norm = numkit::norm(b.v);
  return b;
}

ParamVector plane_point(const PlaneBasis& basis, double l, double t) {
  ParamVector p = basis.origin;
  if (l != 0.0) p.axpy(l, basis.u);
  if (t != 0.0) p.axpy(t, basis.v);
  return p;
}

PlaneGrid plane_grid_eval(const PlaneBasis& basis, const agents::GaussianPolicy& actor, const envs::EnvSpec& env,
                          std::size_t episodes, std::uint64_t seed, const GridOptions& options) {
  const std::size_t n = options.resolution;
  if (n < 2) throw InvalidArgument("grid resolution must be at least 2");
  if (!(options.low < options.high) || !std::isfinite(options.low) || !std::isfinite(options.high)) {
    throw InvalidArgument("grid range must satisfy low < high");
  }
  if (!actor.params.same_shape(basis.origin)) throw InvalidArgument("actor shape does not match the plane basis");
  PlaneGrid g;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(n - 1);
    const double c = (1.0 - f) * options.low + f * options.high;
    g.l.push_back(c);
    g.t.push_back(c);
  }
  g.values = numkit::Matrix(n, n);

  auto run = [&](std::size_t first, std::size_t stride) {
    for (std::size_t k = first; k < n * n; k += stride) {
      const std::size_t i = k / n, j = k % n;
      agents::GaussianPolicy p = actor;
      p.params = plane_point(basis, g.l[j], g.t[i]);
      g.values(i, j) = pipeline::evaluate_policy(p, env, episodes, seed).mean;
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, n * n));
  if (jobs == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex m;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        try {
          run(w, jobs);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }
  return g;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "t,mean,std_error\n";
  for (const auto& p : curve) out += format_real(p.t) + "," + format_real(p.mean) + "," + format_real(p.std_error) + "\n";
  return out;
}

std::string grid_to_csv(const PlaneGrid& grid) {
  std::string out = "t\\l";
  for (double l : grid.l) out += "," + format_real(l);
  out += "\n";
  for (std::size_t i = 0; i < grid.t.size(); ++i) {
    out += format_real(grid.t[i]);
    for (std::size_t j = 0; j < grid.l.size(); ++j) out += "," + format_real(grid.values(i, j));
    out += "\n";
  }
  return out;
}

std::string export_checkpoint_matrix(const std::vector<ParamVector>& params) {
  if (params.empty()) throw InvalidArgument("no checkpoints to export");
  std::string out;
  for (std::size_t r = 0; r < params.size(); ++r) {
    if (!params[r].same_shape(params[0])) {
      throw InvalidArgument("checkpoint " + std::to_string(r) + " has a different actor shape");
    }
    const auto v = params[r].values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += format_real(v[i]);
    }
    out += '\n';
  }
  return out;
}

numkit::Matrix parse_checkpoint_matrix(const std::string& text) {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0, offset = 0, lineno = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t here = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    std::size_t n = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (true) {
      double x = 0.0;
      const auto r = std::from_chars(p, end, x);
      if (r.ec != std::errc{}) throw ParseError("malformed number in checkpoint matrix", lineno, here + (p - line.data()));
      data.push_back(x);
      ++n;
      p = r.ptr;
      if (p == end) break;
      if (*p != ',') throw ParseError("expected ',' in checkpoint matrix", lineno, here + (p - line.data()));
      ++p;
    }
    if (rows == 0) cols = n;
    if (n != cols) throw ParseError("ragged checkpoint matrix row", lineno, here);
    ++rows;
  }
  if (rows == 0) throw ParseError("empty checkpoint matrix", 1, 0);
  return numkit::Matrix(rows, cols, std::move(data));
}

}  // namespace o2o::analysis
