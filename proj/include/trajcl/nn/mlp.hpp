#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "trajcl/nn/param_vector.hpp"
#include "trajcl/rng.hpp"

namespace trajcl::nn {

enum class Activation { relu, tanh, identity };
enum class OutputActivation { identity, softplus, tanh };

std::string_view to_string(Activation a);
std::string_view to_string(OutputActivation a);

/// Fully connected network. Layer l maps layer_sizes[l] -> layer_sizes[l+1];
/// `activation` follows every hidden layer, `output_activation` the last.
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;
  OutputActivation output_activation = OutputActivation::identity;

  /// Throws ConfigError on fewer than two sizes or a zero size.
  void validate() const;
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t param_count() const;
  /// "l<k>.weight" {out, in} (row-major) then "l<k>.bias" {out}, per layer.
  std::vector<LayoutEntry> layout() const;

  bool operator==(const MlpSpec&) const = default;
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
ParamVector init_params(const MlpSpec& spec, Rng& rng);
ParamVector zero_params(const MlpSpec& spec);

/// Throws ConfigError unless params has exactly the spec's layout.
void check_params(const MlpSpec& spec, const ParamVector& params);

/// Activations recorded by a forward pass; reused across calls to avoid
/// reallocating.
struct MlpTape {
  std::vector<double> input;
  std::vector<std::vector<double>> pre;   // per layer, before activation
  std::vector<std::vector<double>> post;  // per layer, after activation
  std::span<const double> output() const { return post.back(); }
};

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                std::span<const double> input);
std::span<const double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                    std::span<const double> input, MlpTape& tape);

struct MlpGradients {
  ParamVector params;
  std::vector<double> input;
};

/// Vector-Jacobian product of mlp_forward at `input` with `output_cotangent`.
MlpGradients mlp_backward(const MlpSpec& spec, const ParamVector& params,
                          std::span<const double> input,
                          std::span<const double> output_cotangent);

/// Accumulating form over a recorded tape. `param_grad` (size param_count)
/// and `input_grad` (size input_dim) are added to; either may be empty to
/// skip it.
void mlp_backward(const MlpSpec& spec, const ParamVector& params, const MlpTape& tape,
                  std::span<const double> output_cotangent, std::span<double> param_grad,
                  std::span<double> input_grad);

// Scalar helpers shared by the encoder and policy heads.

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace trajcl::nn
