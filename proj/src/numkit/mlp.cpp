#include "o2o/numkit/mlp.hpp"

#include <algorithm>
#include <cmath>

#include "o2o/error.hpp"

namespace o2o::numkit {

namespace {

double activate(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// First and second derivative in terms of the pre-activation z and output h.
double activation_d1(Activation a, double z, double h) {
  if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
  return 1.0 - h * h;
}

double activation_d2(Activation a, double h) {
  if (a == Activation::relu) return 0.0;
  return -2.0 * h * (1.0 - h * h);
}

double transform(OutputTransform t, double z) {
  switch (t) {
    case OutputTransform::identity:
      return z;
    case OutputTransform::tanh_squash:
      return std::tanh(z);
    case OutputTransform::exp:
      return std::exp(std::clamp(z, kExpClampLow, kExpClampHigh));
  }
  return z;
}

double transform_d1(OutputTransform t, double z, double y) {
  switch (t) {
    case OutputTransform::identity:
      return 1.0;
    case OutputTransform::tanh_squash:
      return 1.0 - y * y;
    case OutputTransform::exp:
      return (z < kExpClampLow || z > kExpClampHigh) ? 0.0 : y;
  }
  return 1.0;
}

double transform_d2(OutputTransform t, double z, double y) {
  switch (t) {
    case OutputTransform::identity:
      return 0.0;
    case OutputTransform::tanh_squash:
      return -2.0 * y * (1.0 - y * y);
    case OutputTransform::exp:
      return (z < kExpClampLow || z > kExpClampHigh) ? 0.0 : y;
  }
  return 0.0;
}

void require_finite(std::span<const double> v, std::size_t layer) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError("non-finite value in mlp layer " + std::to_string(layer));
    }
  }
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

std::string to_string(OutputTransform t) {
  switch (t) {
    case OutputTransform::identity:
      return "identity";
    case OutputTransform::tanh_squash:
      return "tanh_squash";
    case OutputTransform::exp:
      return "exp";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

OutputTransform parse_output_transform(std::string_view name) {
  if (name == "identity") return OutputTransform::identity;
  if (name == "tanh_squash") return OutputTransform::tanh_squash;
  if (name == "exp") return OutputTransform::exp;
  throw InvalidArgument("unknown output transform '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw InvalidArgument("mlp spec needs at least 2 widths");
  for (std::size_t w : widths)
    if (w == 0) throw InvalidArgument("mlp widths must be positive");
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l + 1] * (widths[l] + 1);
  return n;
}

std::size_t MlpSpec::weight_offset(std::size_t layer) const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < layer; ++l) n += widths[l + 1] * (widths[l] + 1);
  return n;
}

std::size_t MlpSpec::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + widths[layer + 1] * widths[layer];
}

std::vector<ParamBlock> param_blocks(const MlpSpec& spec) {
  std::vector<ParamBlock> blocks;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    blocks.push_back({spec.weight_offset(l), spec.widths[l + 1], spec.widths[l], false});
    blocks.push_back({spec.bias_offset(l), spec.widths[l + 1], 1, true});
  }
  return blocks;
}

ParamVector::ParamVector(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  values_.assign(spec_.param_count(), 0.0);
}

ParamVector::ParamVector(MlpSpec spec, std::vector<double> values)
    : spec_(std::move(spec)), values_(std::move(values)) {
  spec_.validate();
  if (values_.size() != spec_.param_count()) {
    throw InvalidArgument("parameter count " + std::to_string(values_.size()) +
                          " does not match spec (" + std::to_string(spec_.param_count()) + ")");
  }
}

ParamVector ParamVector::glorot(MlpSpec spec, Rng& rng) {
  ParamVector p(std::move(spec));
  for (std::size_t l = 0; l < p.spec_.num_layers(); ++l) {
    const double fan_in = static_cast<double>(p.spec_.widths[l]);
    const double fan_out = static_cast<double>(p.spec_.widths[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    const std::size_t off = p.spec_.weight_offset(l);
    const std::size_t n = p.spec_.widths[l] * p.spec_.widths[l + 1];
    for (std::size_t i = 0; i < n; ++i) p.values_[off + i] = rng.uniform(-limit, limit);
  }
  return p;
}

ParamVector ParamVector::from_layers(MlpSpec spec, const std::vector<Layer>& layers) {
  ParamVector p(std::move(spec));
  if (layers.size() != p.spec_.num_layers()) throw InvalidArgument("layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.weight.rows() != p.spec_.widths[l + 1] || layer.weight.cols() != p.spec_.widths[l] ||
        layer.bias.size() != p.spec_.widths[l + 1]) {
      throw InvalidArgument("layer " + std::to_string(l) + " shape mismatch");
    }
    std::copy(layer.weight.data().begin(), layer.weight.data().end(),
              p.values_.begin() + static_cast<std::ptrdiff_t>(p.spec_.weight_offset(l)));
    std::copy(layer.bias.begin(), layer.bias.end(),
              p.values_.begin() + static_cast<std::ptrdiff_t>(p.spec_.bias_offset(l)));
  }
  return p;
}

std::span<const double> ParamVector::weights(std::size_t layer) const {
  return std::span<const double>(values_).subspan(spec_.weight_offset(layer),
                                                  spec_.widths[layer] * spec_.widths[layer + 1]);
}

std::span<const double> ParamVector::biases(std::size_t layer) const {
  return std::span<const double>(values_).subspan(spec_.bias_offset(layer), spec_.widths[layer + 1]);
}

std::vector<ParamVector::Layer> ParamVector::layers() const {
  std::vector<Layer> out;
  for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
    auto w = weights(l);
    auto b = biases(l);
    out.push_back({Matrix(spec_.widths[l + 1], spec_.widths[l], std::vector<double>(w.begin(), w.end())),
                   std::vector<double>(b.begin(), b.end())});
  }
  return out;
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void ParamVector::require_same_shape(const ParamVector& o, const char* op) const {
  if (!(spec_ == o.spec_)) throw InvalidArgument(std::string("parameter shape mismatch in ") + op);
}

ParamVector& ParamVector::operator+=(const ParamVector& o) {
  require_same_shape(o, "+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& o) {
  require_same_shape(o, "-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ParamVector& ParamVector::axpy(double s, const ParamVector& o) {
  require_same_shape(o, "axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
  return *this;
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double s, ParamVector a) { return a *= s; }

double dot(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw InvalidArgument("parameter length mismatch in dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const ParamVector& a) { return std::sqrt(dot(a, a)); }

MlpTrace mlp_trace(const ParamVector& params, std::span<const double> input) {
  const MlpSpec& spec = params.spec();
  if (input.size() != spec.input_dim()) {
    throw InvalidArgument("mlp input has " + std::to_string(input.size()) + " entries, expected " +
                          std::to_string(spec.input_dim()));
  }
  const std::size_t L = spec.num_layers();
  MlpTrace tr;
  tr.hidden.reserve(L);
  tr.pre.reserve(L);
  tr.hidden.emplace_back(input.begin(), input.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t out = spec.widths[l + 1];
    std::vector<double> z(out);
    matvec(params.weights(l), out, spec.widths[l], tr.hidden[l], z);
    const auto b = params.biases(l);
    for (std::size_t i = 0; i < out; ++i) z[i] += b[i];
    require_finite(z, l);
    if (l + 1 < L) {
      std::vector<double> h(out);
      for (std::size_t i = 0; i < out; ++i) h[i] = activate(spec.activation, z[i]);
      tr.hidden.push_back(std::move(h));
    }
    tr.pre.push_back(std::move(z));
  }
  const auto& zl = tr.pre.back();
  tr.output.resize(zl.size());
  for (std::size_t i = 0; i < zl.size(); ++i) tr.output[i] = transform(spec.output, zl[i]);
  require_finite(tr.output, L - 1);
  return tr;
}

std::vector<double> mlp_forward(const ParamVector& params, std::span<const double> input) {
  return mlp_trace(params, input).output;
}

std::vector<double> mlp_backward(const ParamVector& params, const MlpTrace& trace,
                                 std::span<const double> upstream,
                                 std::span<double> grad_params) {
  const MlpSpec& spec = params.spec();
  const std::size_t L = spec.num_layers();
  if (upstream.size() != spec.output_dim()) throw InvalidArgument("upstream gradient length mismatch");
  const bool want_params = !grad_params.empty();
  if (want_params && grad_params.size() != spec.param_count()) {
    throw InvalidArgument("gradient buffer length mismatch");
  }

  std::vector<double> g(upstream.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = upstream[i] * transform_d1(spec.output, trace.pre.back()[i], trace.output[i]);
  }
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t out = spec.widths[l + 1];
    const std::size_t in = spec.widths[l];
    const auto& h = trace.hidden[l];
    if (want_params) {
      double* gw = grad_params.data() + spec.weight_offset(l);
      double* gb = grad_params.data() + spec.bias_offset(l);
      for (std::size_t r = 0; r < out; ++r) {
        const double gr = g[r];
        gb[r] += gr;
        if (gr == 0.0) continue;
        double* row = gw + r * in;
        for (std::size_t c = 0; c < in; ++c) row[c] += gr * h[c];
      }
    }
    std::vector<double> gh(in);
    matvec_transposed(params.weights(l), out, in, g, gh);
    if (l > 0) {
      const auto& zprev = trace.pre[l - 1];
      for (std::size_t i = 0; i < in; ++i) gh[i] *= activation_d1(spec.activation, zprev[i], h[i]);
      require_finite(gh, l - 1);
    }
    g = std::move(gh);
  }
  return g;
}

MlpGradient mlp_grad(const ParamVector& params, std::span<const double> input,
                     std::span<const double> upstream) {
  const MlpTrace tr = mlp_trace(params, input);
  MlpGradient out{ParamVector(params.spec()), {}};
  out.input = mlp_backward(params, tr, upstream, out.params.values());
  return out;
}

TangentResult mlp_tangent_grad(const ParamVector& params, std::span<const double> input,
                               std::span<const double> direction,
                               std::span<const double> out_weight,
                               std::span<const double> tangent_weight,
                               std::span<double> grad_params) {
  const MlpSpec& spec = params.spec();
  const std::size_t L = spec.num_layers();
  if (direction.size() != input.size()) throw InvalidArgument("direction length mismatch");
  if (out_weight.size() != spec.output_dim() || tangent_weight.size() != spec.output_dim()) {
    throw InvalidArgument("output weight length mismatch");
  }
  if (!grad_params.empty() && grad_params.size() != spec.param_count()) {
    throw InvalidArgument("gradient buffer length mismatch");
  }

  // Forward: values and tangents.
  const MlpTrace tr = mlp_trace(params, input);
  std::vector<std::vector<double>> dh;  // tangent of hidden[l]
  std::vector<std::vector<double>> dz;  // tangent of pre[l]
  dh.emplace_back(direction.begin(), direction.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t out = spec.widths[l + 1];
    std::vector<double> t(out);
    matvec(params.weights(l), out, spec.widths[l], dh[l], t);
    if (l + 1 < L) {
      std::vector<double> th(out);
      for (std::size_t i = 0; i < out; ++i) {
        th[i] = activation_d1(spec.activation, tr.pre[l][i], tr.hidden[l + 1][i]) * t[i];
      }
      dh.push_back(std::move(th));
    }
    dz.push_back(std::move(t));
  }

  TangentResult res;
  res.output = tr.output;
  res.tangent.resize(spec.output_dim());
  std::vector<double> gz(spec.output_dim());
  std::vector<double> gdz(spec.output_dim());
  for (std::size_t i = 0; i < spec.output_dim(); ++i) {
    const double z = tr.pre.back()[i];
    const double y = tr.output[i];
    const double d1 = transform_d1(spec.output, z, y);
    const double d2 = transform_d2(spec.output, z, y);
    res.tangent[i] = d1 * dz.back()[i];
    gz[i] = out_weight[i] * d1 + tangent_weight[i] * d2 * dz.back()[i];
    gdz[i] = tangent_weight[i] * d1;
  }
  if (grad_params.empty()) return res;

  // Reverse through both the value and the tangent streams.
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t out = spec.widths[l + 1];
    const std::size_t in = spec.widths[l];
    const auto& h = tr.hidden[l];
    const auto& th = dh[l];
    double* gw = grad_params.data() + spec.weight_offset(l);
    double* gb = grad_params.data() + spec.bias_offset(l);
    for (std::size_t r = 0; r < out; ++r) {
      gb[r] += gz[r];
      double* row = gw + r * in;
      for (std::size_t c = 0; c < in; ++c) row[c] += gz[r] * h[c] + gdz[r] * th[c];
    }
    if (l == 0) break;
    std::vector<double> gh(in), gdh(in);
    matvec_transposed(params.weights(l), out, in, gz, gh);
    matvec_transposed(params.weights(l), out, in, gdz, gdh);
    const auto& zp = tr.pre[l - 1];
    const auto& dzp = dz[l - 1];
    std::vector<double> ngz(in), ngdz(in);
    for (std::size_t i = 0; i < in; ++i) {
      const double d1 = activation_d1(spec.activation, zp[i], h[i]);
      const double d2 = activation_d2(spec.activation, h[i]);
      ngz[i] = gh[i] * d1 + gdh[i] * d2 * dzp[i];
      ngdz[i] = gdh[i] * d1;
    }
    require_finite(ngz, l - 1);
    gz = std::move(ngz);
    gdz = std::move(ngdz);
  }
  return res;
}

}  // namespace o2o::numkit
