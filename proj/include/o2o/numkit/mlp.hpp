#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "o2o/numkit/matrix.hpp"
#include "o2o/rng.hpp"

namespace o2o::numkit {

enum class Activation { relu, tanh };
enum class OutputTransform { identity, tanh_squash, exp };

std::string to_string(Activation a);
std::string to_string(OutputTransform t);
Activation parse_activation(std::string_view name);
OutputTransform parse_output_transform(std::string_view name);

/// Pre-activation range accepted by the exp output transform.
inline constexpr double kExpClampLow = -10.0;
inline constexpr double kExpClampHigh = 5.0;

/// Fully connected network shape: widths[0] inputs, widths.back() outputs.
struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::relu;
  OutputTransform output = OutputTransform::identity;

  /// Throws InvalidArgument unless there are >= 2 positive widths.
  void validate() const;

  std::size_t num_layers() const { return widths.size() - 1; }
  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  std::size_t param_count() const;
  /// Offset of layer l's weight matrix (rows = widths[l+1], cols = widths[l]).
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// A contiguous slice of a flat parameter vector viewed as a rows x cols matrix.
/// Bias vectors are reported with cols == 1.
struct ParamBlock {
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool is_bias = false;

  std::size_t size() const { return rows * cols; }
};

std::vector<ParamBlock> param_blocks(const MlpSpec& spec);

/// Flat parameters of one network. Layout per layer: weight (row-major), then bias.
class ParamVector {
 public:
  struct Layer {
    Matrix weight;
    std::vector<double> bias;
  };

  ParamVector() = default;
  /// All-zero parameters.
  explicit ParamVector(MlpSpec spec);
  ParamVector(MlpSpec spec, std::vector<double> values);

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  static ParamVector glorot(MlpSpec spec, Rng& rng);
  static ParamVector from_layers(MlpSpec spec, const std::vector<Layer>& layers);

  const MlpSpec& spec() const noexcept { return spec_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> weights(std::size_t layer) const;
  std::span<const double> biases(std::size_t layer) const;

  std::vector<Layer> layers() const;

  bool all_finite() const;
  bool same_shape(const ParamVector& o) const { return spec_ == o.spec_; }

  ParamVector& operator+=(const ParamVector& o);
  ParamVector& operator-=(const ParamVector& o);
  ParamVector& operator*=(double s);
  /// this += s * o
  ParamVector& axpy(double s, const ParamVector& o);

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  void require_same_shape(const ParamVector& o, const char* op) const;

  MlpSpec spec_;
  std::vector<double> values_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double s, ParamVector a);
double dot(const ParamVector& a, const ParamVector& b);
double norm(const ParamVector& a);

/// Intermediate values of one forward pass, kept for the backward pass.
struct MlpTrace {
  /// hidden[0] is the input; hidden[l] is the post-activation input of layer l.
  std::vector<std::vector<double>> hidden;
  /// Pre-activations z_l of every layer; the last is the pre-transform output.
  std::vector<std::vector<double>> pre;
  std::vector<double> output;
};

MlpTrace mlp_trace(const ParamVector& params, std::span<const double> input);

std::vector<double> mlp_forward(const ParamVector& params, std::span<const double> input);

/// Reverse pass for <upstream, output>. Parameter gradients are accumulated into
/// grad_params when it is non-empty; the input gradient is returned.
std::vector<double> mlp_backward(const ParamVector& params, const MlpTrace& trace,
                                 std::span<const double> upstream,
                                 std::span<double> grad_params);

struct MlpGradient {
  ParamVector params;
  std::vector<double> input;
};

MlpGradient mlp_grad(const ParamVector& params, std::span<const double> input,
                     std::span<const double> upstream);

struct TangentResult {
  std::vector<double> output;
  /// J_x f(x) * direction
  std::vector<double> tangent;
};

/// Propagates an input direction forward alongside the value, then accumulates the
/// parameter gradient of <out_weight, output> + <tangent_weight, tangent> into
/// grad_params. With a scalar network this differentiates <direction, grad_x f>
/// with respect to the parameters.
TangentResult mlp_tangent_grad(const ParamVector& params, std::span<const double> input,
                               std::span<const double> direction,
                               std::span<const double> out_weight,
                               std::span<const double> tangent_weight,
                               std::span<double> grad_params);

}  // namespace o2o::numkit
