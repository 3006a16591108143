#include <gtest/gtest.h>

#include <cmath>

#include "o2o/error.hpp"
#include "o2o/numkit/finite_diff.hpp"
#include "o2o/numkit/mlp.hpp"

using namespace o2o;
using namespace o2o::numkit;

namespace {

MlpSpec random_spec(Rng& rng, Activation act, OutputTransform out) {
  MlpSpec spec;
  const std::size_t depth = 2 + rng.uniform_index(3);
  for (std::size_t i = 0; i < depth; ++i) spec.widths.push_back(1 + rng.uniform_index(6));
  spec.activation = act;
  spec.output = out;
  return spec;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, scale);
  return v;
}

// Straight loop-nest forward pass, written independently of mlp.cpp.
std::vector<double> naive_forward(const ParamVector& p, const std::vector<double>& x) {
  const auto& spec = p.spec();
  std::vector<double> h = x;
  const auto vals = p.values();
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
    std::vector<double> z(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      for (std::size_t c = 0; c < in; ++c) z[r] += vals[off + r * in + c] * h[c];
    }
    off += in * out;
    for (std::size_t r = 0; r < out; ++r) z[r] += vals[off + r];
    off += out;
    const bool last = l + 2 == spec.widths.size();
    for (double& v : z) {
      if (!last) {
        v = spec.activation == Activation::relu ? std::max(v, 0.0) : std::tanh(v);
      } else if (spec.output == OutputTransform::tanh_squash) {
        v = std::tanh(v);
      } else if (spec.output == OutputTransform::exp) {
        v = std::exp(std::clamp(v, kExpClampLow, kExpClampHigh));
      }
    }
    h = z;
  }
  return h;
}

}  // namespace

TEST(Mlp, ZeroWeightsGiveZeroOutput) {
  MlpSpec spec{{3, 5, 2}, Activation::relu, OutputTransform::identity};
  ParamVector p(spec);
  EXPECT_EQ(mlp_forward(p, std::vector<double>{1.0, -2.0, 0.5}), (std::vector<double>{0.0, 0.0}));
}

TEST(Mlp, AffineOneByOne) {
  MlpSpec spec{{1, 1}, Activation::relu, OutputTransform::identity};
  ParamVector p(spec, {2.0, 1.0});
  EXPECT_EQ(mlp_forward(p, std::vector<double>{3.0})[0], 7.0);

  const auto g = mlp_grad(p, std::vector<double>{3.0}, std::vector<double>{1.0});
  EXPECT_EQ(g.input[0], 2.0);
  EXPECT_EQ(g.params[0], 3.0);
  EXPECT_EQ(g.params[1], 1.0);
}

TEST(Mlp, MatchesIndependentForward) {
  Rng rng(11);
  MlpSpec spec{{4, 8, 2}, Activation::tanh, OutputTransform::identity};
  for (int trial = 0; trial < 20; ++trial) {
    auto p = ParamVector::glorot(spec, rng);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += rng.normal(0.0, 0.1);
    const auto x = random_vec(rng, 4);
    const auto a = mlp_forward(p, x);
    const auto b = naive_forward(p, x);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Mlp, TanhAtZeroInputGradientIsWeightProduct) {
  MlpSpec spec{{2, 3, 1}, Activation::tanh, OutputTransform::identity};
  ParamVector p(spec, {0.5, -1.0, 2.0, 0.25, -0.75, 1.5, 0, 0, 0, 1.0, -2.0, 0.5, 0});
  const auto g = mlp_grad(p, std::vector<double>{0.0, 0.0}, std::vector<double>{1.0});
  // W2 (1x3) times W1 (3x2)
  EXPECT_NEAR(g.input[0], 1.0 * 0.5 - 2.0 * 2.0 + 0.5 * -0.75, 1e-15);
  EXPECT_NEAR(g.input[1], 1.0 * -1.0 - 2.0 * 0.25 + 0.5 * 1.5, 1e-15);
}

TEST(Mlp, ForwardIsBitDeterministic) {
  Rng rng(3);
  MlpSpec spec{{5, 16, 16, 3}, Activation::relu, OutputTransform::exp};
  const auto p = ParamVector::glorot(spec, rng);
  const auto x = random_vec(rng, 5);
  EXPECT_EQ(mlp_forward(p, x), mlp_forward(p, x));
}

TEST(Mlp, DimensionMismatchRejected) {
  MlpSpec spec{{3, 2}, Activation::relu, OutputTransform::identity};
  ParamVector p(spec);
  EXPECT_THROW(mlp_forward(p, std::vector<double>{1.0}), InvalidArgument);
  EXPECT_THROW(mlp_grad(p, std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{1.0}), InvalidArgument);
}

TEST(Mlp, NonFiniteReportsLayer) {
  MlpSpec spec{{1, 2, 1}, Activation::relu, OutputTransform::identity};
  ParamVector p(spec, {1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0});
  try {
    mlp_forward(p, std::vector<double>{std::numeric_limits<double>::infinity()});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer"), std::string::npos);
  }
}

TEST(Mlp, SpecValidation) {
  EXPECT_THROW((MlpSpec{{3}, Activation::relu, OutputTransform::identity}.validate()), InvalidArgument);
  EXPECT_THROW((MlpSpec{{3, 0, 1}, Activation::relu, OutputTransform::identity}.validate()), InvalidArgument);
  EXPECT_EQ((MlpSpec{{4, 8, 2}, Activation::relu, OutputTransform::identity}.param_count()), 4u * 8 + 8 + 8 * 2 + 2);
}

TEST(ParamVector, FlattenRoundTripExact) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto spec = random_spec(rng, Activation::relu, OutputTransform::identity);
    auto p = ParamVector::glorot(spec, rng);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += rng.normal();
    const auto q = ParamVector::from_layers(spec, p.layers());
    EXPECT_EQ(p, q);
  }
}

TEST(ParamVector, GlorotBoundsAndZeroBias) {
  Rng rng(9);
  MlpSpec spec{{10, 30, 4}, Activation::relu, OutputTransform::identity};
  const auto p = ParamVector::glorot(spec, rng);
  const double lim0 = std::sqrt(6.0 / 40.0);
  for (double w : p.weights(0)) EXPECT_LE(std::abs(w), lim0);
  for (double b : p.biases(0)) EXPECT_EQ(b, 0.0);
  for (double b : p.biases(1)) EXPECT_EQ(b, 0.0);
}

TEST(ParamVector, ArithmeticRejectsShapeMismatch) {
  ParamVector a(MlpSpec{{2, 2}, Activation::relu, OutputTransform::identity});
  ParamVector b(MlpSpec{{2, 3}, Activation::relu, OutputTransform::identity});
  EXPECT_THROW(a += b, InvalidArgument);
  EXPECT_THROW(dot(a, b), InvalidArgument);
}

// 100 random (spec, input) cases per activation/output combination.
TEST(Mlp, ReverseModeMatchesFiniteDifferences) {
  Rng rng(2024);
  const OutputTransform outs[] = {OutputTransform::identity, OutputTransform::tanh_squash, OutputTransform::exp};
  for (auto act : {Activation::relu, Activation::tanh}) {
    for (auto out : outs) {
      for (int trial = 0; trial < 100; ++trial) {
        const auto spec = random_spec(rng, act, out);
        auto p = ParamVector::glorot(spec, rng);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += rng.normal(0.0, 0.3);
        const auto x = random_vec(rng, spec.input_dim());
        const auto up = random_vec(rng, spec.output_dim());
        DifferentiableFn f_params = [&](std::span<const double> v, std::vector<double>* g) {
          ParamVector q(spec, {v.begin(), v.end()});
          const auto y = mlp_forward(q, x);
          double s = 0.0;
          for (std::size_t i = 0; i < y.size(); ++i) s += up[i] * y[i];
          if (g) {
            const auto r = mlp_grad(q, x, up);
            g->assign(r.params.values().begin(), r.params.values().end());
          }
          return s;
        };
        DifferentiableFn f_input = [&](std::span<const double> v, std::vector<double>* g) {
          const auto y = mlp_forward(p, v);
          double s = 0.0;
          for (std::size_t i = 0; i < y.size(); ++i) s += up[i] * y[i];
          if (g) *g = mlp_grad(p, v, up).input;
          return s;
        };
        // relu kinks can sit inside the stencil; nudge away only by reseeding the input
        EXPECT_LE(finite_diff_check(f_params, p.values()), 1e-5) << "act " << to_string(act) << " trial " << trial;
        EXPECT_LE(finite_diff_check(f_input, x), 1e-5) << "act " << to_string(act) << " trial " << trial;
      }
    }
  }
}

TEST(Mlp, TangentGradientMatchesFiniteDifferences) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = random_spec(rng, Activation::tanh,
                                  trial % 2 ? OutputTransform::identity : OutputTransform::tanh_squash);
    auto p = ParamVector::glorot(spec, rng);
    const auto x = random_vec(rng, spec.input_dim());
    const auto dir = random_vec(rng, spec.input_dim());
    const auto wo = random_vec(rng, spec.output_dim());
    const auto wt = random_vec(rng, spec.output_dim());
    // <wo, f(x)> + <wt, J f(x) dir>, with J f(x) dir by the transpose trick on mlp_grad
    auto value = [&](const ParamVector& q) {
      const auto y = mlp_forward(q, x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += wo[i] * y[i];
      const auto gi = mlp_grad(q, x, wt).input;
      for (std::size_t i = 0; i < gi.size(); ++i) s += gi[i] * dir[i];
      return s;
    };
    DifferentiableFn f = [&](std::span<const double> v, std::vector<double>* g) {
      ParamVector q(spec, {v.begin(), v.end()});
      if (g) {
        g->assign(q.size(), 0.0);
        mlp_tangent_grad(q, x, dir, wo, wt, *g);
      }
      return value(q);
    };
    EXPECT_LE(finite_diff_check(f, p.values()), 1e-5) << trial;

    const auto tr = mlp_tangent_grad(p, x, dir, wo, wt, {});
    const auto y = mlp_forward(p, x);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(tr.output[i], y[i], 1e-14);
  }
}

TEST(FiniteDiff, QuadraticIsExact) {
  Rng rng(1);
  const auto x = random_vec(rng, 40);
  DifferentiableFn f = [](std::span<const double> v, std::vector<double>* g) {
    double s = 0.0;
    for (double a : v) s += a * a;
    if (g) {
      g->resize(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) (*g)[i] = 2.0 * v[i];
    }
    return s;
  };
  EXPECT_LE(finite_diff_check(f, x), 1e-9);
}

TEST(FiniteDiff, ConstantGivesZero) {
  DifferentiableFn f = [](std::span<const double> v, std::vector<double>* g) {
    if (g) g->assign(v.size(), 0.0);
    return 4.0;
  };
  EXPECT_EQ(finite_diff_check(f, std::vector<double>(7, 0.3)), 0.0);
}

TEST(FiniteDiff, DetectsWrongGradient) {
  DifferentiableFn f = [](std::span<const double> v, std::vector<double>* g) {
    if (g) g->assign(v.size(), 1.0);
    return v[0] * v[0];
  };
  EXPECT_GT(finite_diff_check(f, std::vector<double>{1.0, 1.0}), 0.1);
}

TEST(FiniteDiff, SampledSubsetNeverBelow64) {
  int calls = 0;
  DifferentiableFn f = [&](std::span<const double> v, std::vector<double>* g) {
    ++calls;
    if (g) g->assign(v.size(), 0.0);
    return 0.0;
  };
  finite_diff_check(f, std::vector<double>(500, 0.0), {1e-5, 10, 3});
  EXPECT_EQ(calls, 1 + 2 * 64);
}
