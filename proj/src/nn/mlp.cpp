#include "trajcl/nn/mlp.hpp"

#include <algorithm>
#include <string>

#include "trajcl/errors.hpp"
#include "trajcl/kernels.hpp"

namespace trajcl::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

std::string_view to_string(OutputActivation a) {
  switch (a) {
    case OutputActivation::identity: return "identity";
    case OutputActivation::softplus: return "softplus";
    case OutputActivation::tanh: return "tanh";
  }
  return "?";
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("MlpSpec needs at least two layer sizes");
  for (const auto s : layer_sizes) {
    if (s == 0) throw ConfigError("MlpSpec layer sizes must be >= 1");
  }
}

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    n += layer_sizes[l + 1] * (layer_sizes[l] + 1);
  }
  return n;
}

std::vector<LayoutEntry> MlpSpec::layout() const {
  validate();
  std::vector<LayoutEntry> out;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::string p = "l" + std::to_string(l);
    out.push_back({p + ".weight", {layer_sizes[l + 1], layer_sizes[l]}});
    out.push_back({p + ".bias", {layer_sizes[l + 1]}});
  }
  return out;
}

ParamVector init_params(const MlpSpec& spec, Rng& rng) {
  ParamVector p(spec.layout());
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.layer_sizes[l]));
    for (double& w : p.block(2 * l)) w = uniform(rng, -bound, bound);
  }
  return p;
}

ParamVector zero_params(const MlpSpec& spec) { return ParamVector(spec.layout()); }

void check_params(const MlpSpec& spec, const ParamVector& params) {
  if (params.layout() != spec.layout()) {
    throw ConfigError("parameter layout does not match network spec");
  }
}

namespace {

void activate(Activation a, std::span<const double> pre, std::span<double> post) {
  switch (a) {
    case Activation::relu:
      for (std::size_t i = 0; i < pre.size(); ++i) post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < pre.size(); ++i) post[i] = std::tanh(pre[i]);
      break;
    case Activation::identity:
      std::copy(pre.begin(), pre.end(), post.begin());
      break;
  }
}

void activate(OutputActivation a, std::span<const double> pre, std::span<double> post) {
  switch (a) {
    case OutputActivation::identity:
      std::copy(pre.begin(), pre.end(), post.begin());
      break;
    case OutputActivation::softplus:
      for (std::size_t i = 0; i < pre.size(); ++i) post[i] = softplus(pre[i]);
      break;
    case OutputActivation::tanh:
      for (std::size_t i = 0; i < pre.size(); ++i) post[i] = std::tanh(pre[i]);
      break;
  }
}

// g <- g * act'(pre), using post where cheaper.
void activate_backward(Activation a, std::span<const double> pre,
                       std::span<const double> post, std::span<double> g) {
  switch (a) {
    case Activation::relu:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (pre[i] <= 0.0) g[i] = 0.0;
      }
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - post[i] * post[i];
      break;
    case Activation::identity:
      break;
  }
}

void activate_backward(OutputActivation a, std::span<const double> pre,
                       std::span<const double> post, std::span<double> g) {
  switch (a) {
    case OutputActivation::identity:
      break;
    case OutputActivation::softplus:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= sigmoid(pre[i]);
      break;
    case OutputActivation::tanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - post[i] * post[i];
      break;
  }
}

void check_shapes(const MlpSpec& spec, const ParamVector& params,
                  std::span<const double> input) {
  if (input.size() != spec.input_dim()) {
    throw ConfigError("mlp input has " + std::to_string(input.size()) +
                      " entries, expected " + std::to_string(spec.input_dim()));
  }
  if (params.size() != spec.param_count()) {
    throw ConfigError("mlp parameter count does not match spec");
  }
}

}  // namespace

std::span<const double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                    std::span<const double> input, MlpTape& tape) {
  check_shapes(spec, params, input);
  const std::size_t layers = spec.num_layers();
  tape.input.assign(input.begin(), input.end());
  tape.pre.resize(layers);
  tape.post.resize(layers);
  std::span<const double> x = tape.input;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t out = spec.layer_sizes[l + 1];
    tape.pre[l].resize(out);
    tape.post[l].resize(out);
    kernels::gemv(params.block(2 * l), x, params.block(2 * l + 1), tape.pre[l]);
    if (l + 1 < layers) {
      activate(spec.activation, tape.pre[l], tape.post[l]);
    } else {
      activate(spec.output_activation, tape.pre[l], tape.post[l]);
    }
    x = tape.post[l];
  }
  return tape.output();
}

std::vector<double> mlp_forward(const MlpSpec& spec, const ParamVector& params,
                                std::span<const double> input) {
  MlpTape tape;
  const auto out = mlp_forward(spec, params, input, tape);
  return {out.begin(), out.end()};
}

void mlp_backward(const MlpSpec& spec, const ParamVector& params, const MlpTape& tape,
                  std::span<const double> output_cotangent, std::span<double> param_grad,
                  std::span<double> input_grad) {
  const std::size_t layers = spec.num_layers();
  if (output_cotangent.size() != spec.output_dim()) {
    throw ConfigError("mlp cotangent size does not match output dimension");
  }
  if (!param_grad.empty() && param_grad.size() != params.size()) {
    throw ConfigError("mlp parameter gradient buffer has wrong size");
  }
  if (!input_grad.empty() && input_grad.size() != spec.input_dim()) {
    throw ConfigError("mlp input gradient buffer has wrong size");
  }

  std::vector<double> g(output_cotangent.begin(), output_cotangent.end());
  std::vector<double> g_prev;
  std::size_t offset = params.size();
  for (std::size_t li = layers; li-- > 0;) {
    const std::size_t in = spec.layer_sizes[li];
    const std::size_t out = spec.layer_sizes[li + 1];
    if (li + 1 == layers) {
      activate_backward(spec.output_activation, tape.pre[li], tape.post[li], g);
    } else {
      activate_backward(spec.activation, tape.pre[li], tape.post[li], g);
    }
    const std::span<const double> x =
        li == 0 ? std::span<const double>(tape.input) : std::span<const double>(tape.post[li - 1]);
    offset -= out * in + out;
    if (!param_grad.empty()) {
      auto dw = param_grad.subspan(offset, out * in);
      auto db = param_grad.subspan(offset + out * in, out);
      kernels::outer_acc(g, x, dw);
      for (std::size_t i = 0; i < out; ++i) db[i] += g[i];
    }
    if (li == 0 && input_grad.empty()) break;
    g_prev.assign(in, 0.0);
    kernels::gemv_t_acc(params.block(2 * li), g, g_prev);
    if (li == 0) {
      for (std::size_t i = 0; i < in; ++i) input_grad[i] += g_prev[i];
    }
    g.swap(g_prev);
  }
}

MlpGradients mlp_backward(const MlpSpec& spec, const ParamVector& params,
                          std::span<const double> input,
                          std::span<const double> output_cotangent) {
  MlpTape tape;
  mlp_forward(spec, params, input, tape);
  MlpGradients grads{ParamVector(params.layout()), std::vector<double>(spec.input_dim(), 0.0)};
  mlp_backward(spec, params, tape, output_cotangent, grads.params.values(), grads.input);
  return grads;
}

}  // namespace trajcl::nn
