#pragma once

// Probabilistic context encoder. Each transition (s, a, r, s') maps to a
// diagonal Gaussian factor; the task posterior is the normalized product of
// the factors. Queries use the gradient-trained parameters, keys an EMA copy.

#include <cstddef>
#include <span>
#include <vector>

#include "trajcl/env.hpp"
#include "trajcl/nn/mlp.hpp"
#include "trajcl/nn/param_vector.hpp"
#include "trajcl/replay.hpp"
#include "trajcl/rng.hpp"

namespace trajcl::encoder {

using env::Transition;

/// Lower bound added to every softplus standard deviation.
inline constexpr double kStdFloor = 1e-4;

struct GaussianFactor {
  std::vector<double> mean;
  std::vector<double> std;
};

struct PosteriorGaussian {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t dim() const { return mean.size(); }
  static PosteriorGaussian unit(std::size_t dim);
  bool operator==(const PosteriorGaussian&) const = default;
};

struct ContextEmbedding {
  std::vector<double> z;
  PosteriorGaussian posterior;
  std::vector<double> noise;  // z = mean + std * noise
};

/// Query/key encoder parameters sharing one network spec. The spec maps a
/// flattened transition to 2 * context_dim raw outputs (mean, raw std).
struct EncoderPair {
  nn::MlpSpec spec;
  nn::ParamVector query_params;
  nn::ParamVector key_params;
  std::size_t context_dim = 0;

  /// Key starts as an exact copy of the query.
  static EncoderPair create(std::size_t input_dim, std::size_t context_dim,
                            const std::vector<std::size_t>& hidden, Rng& rng);
};

nn::MlpSpec encoder_spec(std::size_t input_dim, std::size_t context_dim,
                         const std::vector<std::size_t>& hidden);

/// Concatenation (s, a, r, s').
std::vector<double> transition_features(const Transition& t);
std::size_t transition_feature_dim(env::TaskFamily family);

GaussianFactor factor_from_raw(std::span<const double> raw, std::size_t context_dim);

std::vector<GaussianFactor> encode_factors(const nn::MlpSpec& spec,
                                           const nn::ParamVector& params,
                                           std::size_t context_dim,
                                           std::span<const Transition> transitions);
std::vector<GaussianFactor> encode_factors(const nn::MlpSpec& spec,
                                           const nn::ParamVector& params,
                                           std::size_t context_dim,
                                           const replay::TransitionWindow& window);

/// Per-dimension precision-weighted product. Throws UsageError on an empty
/// list and ConfigError on inconsistent dimensions.
PosteriorGaussian product_of_gaussians(std::span<const GaussianFactor> factors);

struct FactorGradients {
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> std;
};

/// Pulls posterior cotangents (d_mean, d_std) back onto every factor.
FactorGradients product_of_gaussians_backward(std::span<const GaussianFactor> factors,
                                              const PosteriorGaussian& posterior,
                                              std::span<const double> d_mean,
                                              std::span<const double> d_std);

/// Reparameterized draw z = mean + std * eps.
ContextEmbedding sample_z(const PosteriorGaussian& posterior, Rng& rng);

/// KL(N(mean, diag(std^2)) || N(0, I)).
double kl_to_unit_prior(const PosteriorGaussian& posterior);
/// Adds scale * dKL/dmean and scale * dKL/dstd.
void kl_to_unit_prior_backward(const PosteriorGaussian& posterior, double scale,
                               std::span<double> d_mean, std::span<double> d_std);

/// key <- m * key + (1 - m) * query. Throws ConfigError unless m in [0, 1].
void ema_update(EncoderPair& pair, double momentum);

/// Forward pass over a set of transitions that keeps the per-transition
/// tapes, so posterior cotangents can be pushed back to the parameters.
class WindowEncoding {
 public:
  WindowEncoding(const nn::MlpSpec& spec, const nn::ParamVector& params,
                 std::size_t context_dim, std::span<const Transition> transitions);

  const PosteriorGaussian& posterior() const { return posterior_; }
  const std::vector<GaussianFactor>& factors() const { return factors_; }

  /// Accumulates d(loss)/d(params) into param_grad given posterior cotangents.
  void backward(const nn::MlpSpec& spec, const nn::ParamVector& params,
                std::span<const double> d_mean, std::span<const double> d_std,
                std::span<double> param_grad) const;

 private:
  std::size_t context_dim_;
  std::vector<nn::MlpTape> tapes_;
  std::vector<GaussianFactor> factors_;
  PosteriorGaussian posterior_;
};

/// Posterior of the query encoder over a transition set, without tapes.
PosteriorGaussian infer_posterior(const EncoderPair& pair, std::span<const Transition> transitions,
                                  bool use_key = false);

}  // namespace trajcl::encoder
