#include "trajcl/encoder.hpp"

#include <cmath>
#include <string>

#include "trajcl/errors.hpp"

namespace trajcl::encoder {

PosteriorGaussian PosteriorGaussian::unit(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

nn::MlpSpec encoder_spec(std::size_t input_dim, std::size_t context_dim,
                         const std::vector<std::size_t>& hidden) {
  if (context_dim == 0) throw ConfigError("context dimension must be >= 1");
  nn::MlpSpec spec;
  spec.layer_sizes.push_back(input_dim);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
  spec.layer_sizes.push_back(2 * context_dim);
  spec.activation = nn::Activation::relu;
  spec.output_activation = nn::OutputActivation::identity;
  spec.validate();
  return spec;
}

EncoderPair EncoderPair::create(std::size_t input_dim, std::size_t context_dim,
                                const std::vector<std::size_t>& hidden, Rng& rng) {
  EncoderPair pair;
  pair.spec = encoder_spec(input_dim, context_dim, hidden);
  pair.context_dim = context_dim;
  pair.query_params = nn::init_params(pair.spec, rng);
  pair.key_params = pair.query_params;
  return pair;
}

std::vector<double> transition_features(const Transition& t) {
  std::vector<double> f;
  f.reserve(t.state.size() * 2 + t.action.size() + 1);
  f.insert(f.end(), t.state.begin(), t.state.end());
  f.insert(f.end(), t.action.begin(), t.action.end());
  f.push_back(t.reward);
  f.insert(f.end(), t.next_state.begin(), t.next_state.end());
  return f;
}

std::size_t transition_feature_dim(env::TaskFamily family) {
  return 2 * env::state_dim(family) + env::action_dim(family) + 1;
}

GaussianFactor factor_from_raw(std::span<const double> raw, std::size_t context_dim) {
  if (raw.size() != 2 * context_dim) {
    throw ConfigError("encoder output must have 2 * context_dim entries");
  }
  GaussianFactor f;
  f.mean.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(context_dim));
  f.std.resize(context_dim);
  for (std::size_t j = 0; j < context_dim; ++j) {
    f.std[j] = nn::softplus(raw[context_dim + j]) + kStdFloor;
  }
  return f;
}

std::vector<GaussianFactor> encode_factors(const nn::MlpSpec& spec,
                                           const nn::ParamVector& params,
                                           std::size_t context_dim,
                                           std::span<const Transition> transitions) {
  if (spec.output_dim() != 2 * context_dim) {
    throw ConfigError("encoder spec output does not match context dimension");
  }
  std::vector<GaussianFactor> factors;
  factors.reserve(transitions.size());
  nn::MlpTape tape;
  for (const auto& t : transitions) {
    const auto x = transition_features(t);
    factors.push_back(factor_from_raw(nn::mlp_forward(spec, params, x, tape), context_dim));
  }
  return factors;
}

std::vector<GaussianFactor> encode_factors(const nn::MlpSpec& spec,
                                           const nn::ParamVector& params,
                                           std::size_t context_dim,
                                           const replay::TransitionWindow& window) {
  return encode_factors(spec, params, context_dim, window.transitions);
}

PosteriorGaussian product_of_gaussians(std::span<const GaussianFactor> factors) {
  if (factors.empty()) throw UsageError("product_of_gaussians needs at least one factor");
  const std::size_t d = factors.front().mean.size();
  std::vector<double> precision(d, 0.0);
  std::vector<double> weighted(d, 0.0);
  for (const auto& f : factors) {
    if (f.mean.size() != d || f.std.size() != d) {
      throw ConfigError("product_of_gaussians: inconsistent factor dimensions");
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double p = 1.0 / (f.std[j] * f.std[j]);
      precision[j] += p;
      weighted[j] += f.mean[j] * p;
    }
  }
  PosteriorGaussian post;
  post.mean.resize(d);
  post.std.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double var = 1.0 / precision[j];
    post.mean[j] = weighted[j] * var;
    post.std[j] = std::sqrt(var);
  }
  return post;
}

FactorGradients product_of_gaussians_backward(std::span<const GaussianFactor> factors,
                                              const PosteriorGaussian& posterior,
                                              std::span<const double> d_mean,
                                              std::span<const double> d_std) {
  // mean = var * sum(mu_i / s_i^2), var = 1 / sum(1 / s_i^2), std = sqrt(var):
  //   dmean/dmu_i = var / s_i^2
  //   dmean/ds_i  = 2 var (mean - mu_i) / s_i^3
  //   dstd/ds_i   = std^3 / s_i^3
  const std::size_t d = posterior.dim();
  FactorGradients g;
  g.mean.assign(factors.size(), std::vector<double>(d, 0.0));
  g.std.assign(factors.size(), std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < factors.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double s = factors[i].std[j];
      const double var = posterior.std[j] * posterior.std[j];
      const double inv_s2 = 1.0 / (s * s);
      const double inv_s3 = inv_s2 / s;
      g.mean[i][j] = d_mean[j] * var * inv_s2;
      g.std[i][j] = d_mean[j] * 2.0 * var * (posterior.mean[j] - factors[i].mean[j]) * inv_s3 +
                    d_std[j] * var * posterior.std[j] * inv_s3;
    }
  }
  return g;
}

ContextEmbedding sample_z(const PosteriorGaussian& posterior, Rng& rng) {
  ContextEmbedding e;
  e.posterior = posterior;
  e.noise.resize(posterior.dim());
  e.z.resize(posterior.dim());
  for (std::size_t j = 0; j < posterior.dim(); ++j) {
    e.noise[j] = standard_normal(rng);
    e.z[j] = posterior.mean[j] + posterior.std[j] * e.noise[j];
  }
  return e;
}

double kl_to_unit_prior(const PosteriorGaussian& posterior) {
  double kl = 0.0;
  for (std::size_t j = 0; j < posterior.dim(); ++j) {
    const double m = posterior.mean[j];
    const double v = posterior.std[j] * posterior.std[j];
    kl += m * m + v - 1.0 - std::log(v);
  }
  return 0.5 * kl;
}

void kl_to_unit_prior_backward(const PosteriorGaussian& posterior, double scale,
                               std::span<double> d_mean, std::span<double> d_std) {
  for (std::size_t j = 0; j < posterior.dim(); ++j) {
    d_mean[j] += scale * posterior.mean[j];
    d_std[j] += scale * (posterior.std[j] - 1.0 / posterior.std[j]);
  }
}

void ema_update(EncoderPair& pair, double momentum) {
  if (!(momentum >= 0.0 && momentum <= 1.0)) {
    throw ConfigError("EMA momentum must be in [0, 1], got " + std::to_string(momentum));
  }
  if (!pair.key_params.same_layout(pair.query_params)) {
    throw ConfigError("query and key encoders have different layouts");
  }
  auto key = pair.key_params.values();
  const auto query = pair.query_params.values();
  for (std::size_t i = 0; i < key.size(); ++i) {
    key[i] = momentum * key[i] + (1.0 - momentum) * query[i];
  }
}

WindowEncoding::WindowEncoding(const nn::MlpSpec& spec, const nn::ParamVector& params,
                               std::size_t context_dim,
                               std::span<const Transition> transitions)
    : context_dim_(context_dim) {
  if (spec.output_dim() != 2 * context_dim) {
    throw ConfigError("encoder spec output does not match context dimension");
  }
  tapes_.resize(transitions.size());
  factors_.reserve(transitions.size());
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto x = transition_features(transitions[i]);
    factors_.push_back(factor_from_raw(nn::mlp_forward(spec, params, x, tapes_[i]), context_dim));
  }
  posterior_ = product_of_gaussians(factors_);
}

void WindowEncoding::backward(const nn::MlpSpec& spec, const nn::ParamVector& params,
                              std::span<const double> d_mean, std::span<const double> d_std,
                              std::span<double> param_grad) const {
  const auto fg = product_of_gaussians_backward(factors_, posterior_, d_mean, d_std);
  std::vector<double> cot(2 * context_dim_);
  for (std::size_t i = 0; i < tapes_.size(); ++i) {
    const auto raw = tapes_[i].output();
    for (std::size_t j = 0; j < context_dim_; ++j) {
      cot[j] = fg.mean[i][j];
      cot[context_dim_ + j] = fg.std[i][j] * nn::sigmoid(raw[context_dim_ + j]);
    }
    nn::mlp_backward(spec, params, tapes_[i], cot, param_grad, {});
  }
}

PosteriorGaussian infer_posterior(const EncoderPair& pair, std::span<const Transition> transitions,
                                  bool use_key) {
  const auto& params = use_key ? pair.key_params : pair.query_params;
  return product_of_gaussians(encode_factors(pair.spec, params, pair.context_dim, transitions));
}

}  // namespace trajcl::encoder
