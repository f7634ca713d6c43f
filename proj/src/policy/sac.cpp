#include "trajcl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "trajcl/encoder.hpp"
#include "trajcl/errors.hpp"

namespace trajcl::policy {
namespace {

nn::MlpSpec make_spec(std::size_t in, std::size_t out, const std::vector<std::size_t>& hidden) {
  nn::MlpSpec spec;
  spec.layer_sizes.push_back(in);
  spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
  spec.layer_sizes.push_back(out);
  spec.activation = nn::Activation::relu;
  spec.output_activation = nn::OutputActivation::identity;
  spec.validate();
  return spec;
}

void concat_into(std::vector<double>& out, std::initializer_list<std::span<const double>> parts) {
  out.clear();
  for (const auto p : parts) out.insert(out.end(), p.begin(), p.end());
}

// log(1 - tanh(u)^2), stable for large |u|.
double log_one_minus_tanh_sq(double u) {
  return 2.0 * (std::numbers::ln2 - u - nn::softplus(-2.0 * u));
}

void split_head(std::span<const double> out, std::size_t ad, ActionSample& s) {
  s.mean.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(ad));
  s.raw_std.assign(out.begin() + static_cast<std::ptrdiff_t>(ad), out.end());
  s.std.resize(ad);
  for (std::size_t j = 0; j < ad; ++j) s.std[j] = nn::softplus(s.raw_std[j]) + encoder::kStdFloor;
}

void check_z(std::span<const double> z, std::size_t context_dim) {
  if (z.size() != context_dim) throw ConfigError("context vector has wrong dimension");
}

// Reparameterized draw that also keeps the actor tape for backprop.
ActionSample draw(const ActorParams& actor, std::span<const double> state,
                  std::span<const double> z, Rng& rng, nn::MlpTape& tape,
                  std::vector<double>& input) {
  concat_into(input, {state, z});
  const auto out = nn::mlp_forward(actor.spec, actor.params, input, tape);
  ActionSample s;
  split_head(out, actor.action_dim, s);
  const std::size_t ad = actor.action_dim;
  s.noise.resize(ad);
  s.pre_tanh.resize(ad);
  s.action.resize(ad);
  for (std::size_t j = 0; j < ad; ++j) {
    s.noise[j] = standard_normal(rng);
    s.pre_tanh[j] = s.mean[j] + s.std[j] * s.noise[j];
    s.action[j] = std::tanh(s.pre_tanh[j]);
  }
  s.log_prob = squashed_gaussian_log_prob(s.pre_tanh, s.mean, s.std);
  return s;
}

}  // namespace

ActorParams ActorParams::create(std::size_t state_dim, std::size_t action_dim,
                                std::size_t context_dim, const std::vector<std::size_t>& hidden,
                                Rng& rng) {
  ActorParams a;
  a.spec = make_spec(state_dim + context_dim, 2 * action_dim, hidden);
  a.params = nn::init_params(a.spec, rng);
  a.state_dim = state_dim;
  a.action_dim = action_dim;
  a.context_dim = context_dim;
  return a;
}

CriticParams CriticParams::create(std::size_t state_dim, std::size_t action_dim,
                                  std::size_t context_dim,
                                  const std::vector<std::size_t>& hidden, Rng& rng) {
  CriticParams c;
  c.spec = make_spec(state_dim + action_dim + context_dim, 1, hidden);
  c.q1 = nn::init_params(c.spec, rng);
  c.q2 = nn::init_params(c.spec, rng);
  c.q1_target = c.q1;
  c.q2_target = c.q2;
  c.state_dim = state_dim;
  c.action_dim = action_dim;
  c.context_dim = context_dim;
  return c;
}

double squashed_gaussian_log_prob(std::span<const double> pre_tanh,
                                  std::span<const double> mean, std::span<const double> std) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (std::size_t j = 0; j < pre_tanh.size(); ++j) {
    const double eps = (pre_tanh[j] - mean[j]) / std[j];
    lp += -0.5 * eps * eps - std::log(std[j]) - half_log_2pi -
          log_one_minus_tanh_sq(pre_tanh[j]);
  }
  return lp;
}

ActionSample sample_action(const ActorParams& actor, std::span<const double> state,
                           std::span<const double> z, Rng& rng) {
  check_z(z, actor.context_dim);
  nn::MlpTape tape;
  std::vector<double> input;
  return draw(actor, state, z, rng, tape, input);
}

std::vector<double> policy_act(const ActorParams& actor, std::span<const double> state,
                               std::span<const double> z, Rng& rng, bool deterministic) {
  check_z(z, actor.context_dim);
  if (!deterministic) return sample_action(actor, state, z, rng).action;
  std::vector<double> input;
  concat_into(input, {state, z});
  const auto out = nn::mlp_forward(actor.spec, actor.params, input);
  std::vector<double> a(actor.action_dim);
  for (std::size_t j = 0; j < actor.action_dim; ++j) a[j] = std::tanh(out[j]);
  return a;
}

double q_value(const nn::MlpSpec& spec, const nn::ParamVector& q, std::span<const double> state,
               std::span<const double> action, std::span<const double> z) {
  std::vector<double> input;
  concat_into(input, {state, action, z});
  return nn::mlp_forward(spec, q, input)[0];
}

CriticLossResult critic_loss(const CriticParams& critics, const ActorParams& actor,
                             const RlBatch& batch, const SacConfig& config, Rng& rng) {
  check_z(batch.z, critics.context_dim);
  const std::size_t n = batch.transitions.size();
  CriticLossResult r;
  r.grad_q1.assign(critics.q1.size(), 0.0);
  r.grad_q2.assign(critics.q2.size(), 0.0);
  r.grad_z.assign(critics.context_dim, 0.0);
  if (n == 0) return r;

  const std::size_t z_offset = critics.state_dim + critics.action_dim;
  const double inv_n = 1.0 / static_cast<double>(n);
  nn::MlpTape actor_tape, tape1, tape2;
  std::vector<double> actor_in, q_in;
  std::vector<double> in_grad(critics.spec.input_dim());
  r.targets.resize(n);
  double l1 = 0.0, l2 = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const auto& t = batch.transitions[b];
    const ActionSample next = draw(actor, t.next_state, batch.z, rng, actor_tape, actor_in);
    concat_into(q_in, {t.next_state, next.action, batch.z});
    const double qt1 = nn::mlp_forward(critics.spec, critics.q1_target, q_in, tape1)[0];
    const double qt2 = nn::mlp_forward(critics.spec, critics.q2_target, q_in, tape2)[0];
    const double y = config.reward_scale * t.reward +
                     config.discount *
                         (std::min(qt1, qt2) - config.entropy_weight * next.log_prob);
    r.targets[b] = y;

    concat_into(q_in, {t.state, t.action, batch.z});
    const double q1 = nn::mlp_forward(critics.spec, critics.q1, q_in, tape1)[0];
    const double q2 = nn::mlp_forward(critics.spec, critics.q2, q_in, tape2)[0];
    l1 += (q1 - y) * (q1 - y);
    l2 += (q2 - y) * (q2 - y);

    std::fill(in_grad.begin(), in_grad.end(), 0.0);
    const double c1 = 2.0 * (q1 - y) * inv_n;
    const double c2 = 2.0 * (q2 - y) * inv_n;
    nn::mlp_backward(critics.spec, critics.q1, tape1, std::span<const double>(&c1, 1),
                     r.grad_q1, in_grad);
    nn::mlp_backward(critics.spec, critics.q2, tape2, std::span<const double>(&c2, 1),
                     r.grad_q2, in_grad);
    for (std::size_t j = 0; j < critics.context_dim; ++j) r.grad_z[j] += in_grad[z_offset + j];
  }
  r.loss = (l1 + l2) * inv_n;
  return r;
}

ActorLossResult actor_loss(const ActorParams& actor, const CriticParams& critics,
                           const RlBatch& batch, double entropy_weight, Rng& rng) {
  check_z(batch.z, actor.context_dim);
  const std::size_t n = batch.transitions.size();
  const std::size_t ad = actor.action_dim;
  ActorLossResult r;
  r.grad_actor.assign(actor.params.size(), 0.0);
  if (n == 0) return r;

  const double inv_n = 1.0 / static_cast<double>(n);
  nn::MlpTape actor_tape, tape1, tape2;
  std::vector<double> actor_in, q_in;
  std::vector<double> q_grad(critics.spec.input_dim());
  std::vector<double> head_cot(2 * ad);
  const double one = 1.0;
  double total = 0.0, total_lp = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const auto& t = batch.transitions[b];
    const ActionSample s = draw(actor, t.state, batch.z, rng, actor_tape, actor_in);
    concat_into(q_in, {t.state, s.action, batch.z});
    const double q1 = nn::mlp_forward(critics.spec, critics.q1, q_in, tape1)[0];
    const double q2 = nn::mlp_forward(critics.spec, critics.q2, q_in, tape2)[0];
    const bool use_q1 = q1 <= q2;
    total += entropy_weight * s.log_prob - (use_q1 ? q1 : q2);
    total_lp += s.log_prob;

    // dQmin/da via the selected critic's input gradient.
    std::fill(q_grad.begin(), q_grad.end(), 0.0);
    nn::mlp_backward(critics.spec, use_q1 ? critics.q1 : critics.q2, use_q1 ? tape1 : tape2,
                     std::span<const double>(&one, 1), {}, q_grad);

    // d logpi/du = 2 tanh(u) (tanh correction); d logpi/dstd = -1/std at fixed noise.
    for (std::size_t j = 0; j < ad; ++j) {
      const double a = s.action[j];
      const double dq_du = q_grad[actor.state_dim + j] * (1.0 - a * a);
      const double dl_du = entropy_weight * 2.0 * a - dq_du;
      const double dl_dstd = dl_du * s.noise[j] - entropy_weight / s.std[j];
      head_cot[j] = dl_du * inv_n;
      head_cot[ad + j] = dl_dstd * nn::sigmoid(s.raw_std[j]) * inv_n;
    }
    nn::mlp_backward(actor.spec, actor.params, actor_tape, head_cot, r.grad_actor, {});
  }
  r.loss = total * inv_n;
  r.mean_log_prob = total_lp * inv_n;
  return r;
}

void soft_update_targets(CriticParams& critics, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ConfigError("target update rate must be in [0, 1], got " + std::to_string(rate));
  }
  auto blend = [rate](nn::ParamVector& target, const nn::ParamVector& live) {
    auto t = target.values();
    const auto l = live.values();
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - rate) * t[i] + rate * l[i];
  };
  blend(critics.q1_target, critics.q1);
  blend(critics.q2_target, critics.q2);
}

}  // namespace trajcl::policy
