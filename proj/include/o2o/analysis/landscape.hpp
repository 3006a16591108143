#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "o2o/agents/policy.hpp"
#include "o2o/envs/env.hpp"
#include "o2o/numkit/matrix.hpp"

namespace o2o::analysis {

using numkit::ParamVector;

/// (1 - t) * a + t * b. Throws InvalidArgument on a shape mismatch.
ParamVector lerp_params(const ParamVector& a, const ParamVector& b, double t);

struct CurvePoint {
  double t = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
};

/// Evaluates the actor at (1 - t) * offline + t * online for every t, so t = 0 is
/// the pre-trained checkpoint. Every point uses the same evaluation seed.
/// t may lie outside [0, 1].
std::vector<CurvePoint> interpolate_eval(const agents::GaussianPolicy& offline, const agents::GaussianPolicy& online,
                                         const std::vector<double>& ts, const envs::EnvSpec& env,
                                         std::size_t episodes, std::uint64_t seed);

/// Origin theta_1 with u' = theta_2 - theta_1 and v' the part of theta_3 - theta_1
/// orthogonal to u'.
struct PlaneBasis {
  ParamVector origin;
  ParamVector u;
  ParamVector v;
  double u_norm = 0.0;
  double v_norm = 0.0;
  /// Cosine between theta_2 - theta_1 and theta_3 - theta_1 before projection.
  double input_cosine = 0.0;
};

/// Throws InvalidArgument when theta_2 == theta_1 or when theta_3 - theta_1 is
/// (numerically) collinear with theta_2 - theta_1; the message reports the cosine.
PlaneBasis plane_basis(const ParamVector& theta1, const ParamVector& theta2, const ParamVector& theta3);

/// origin + l * u + t * v.
ParamVector plane_point(const PlaneBasis& basis, double l, double t);

struct PlaneGrid {
  /// Coordinates along u (columns) and along v (rows).
  std::vector<double> l;
  std::vector<double> t;
  /// values(i, j) is the mean return at (l[j], t[i]).
  numkit::Matrix values;
};

struct GridOptions {
  double low = -0.2;
  double high = 1.2;
  std::size_t resolution = 15;
  /// Worker threads; cells are independent, so the result does not depend on it.
  std::size_t jobs = 1;
};

/// Evaluates `actor` (its shape and action box) with parameters plane_point(l, t)
/// on a resolution x resolution grid over [low, high]^2.
PlaneGrid plane_grid_eval(const PlaneBasis& basis, const agents::GaussianPolicy& actor, const envs::EnvSpec& env,
                          std::size_t episodes, std::uint64_t seed, const GridOptions& options = {});

/// "t,mean,std_error" rows.
std::string curve_to_csv(const std::vector<CurvePoint>& curve);
/// Header "t\l,l_0,...", then one row per t coordinate.
std::string grid_to_csv(const PlaneGrid& grid);

/// One row of flattened parameters per checkpoint, comma separated, %.17g.
/// Throws InvalidArgument on an empty list or a shape mismatch.
std::string export_checkpoint_matrix(const std::vector<ParamVector>& params);
/// Inverse of export_checkpoint_matrix; ParseError on ragged or malformed rows.
numkit::Matrix parse_checkpoint_matrix(const std::string& text);

}  // namespace o2o::analysis
