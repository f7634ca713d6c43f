#pragma once

// Context-conditioned soft actor-critic: a tanh-squashed Gaussian actor
// pi(a | s, z) and twin Q-functions Q(s, a, z) with Polyak-averaged targets.

#include <cstddef>
#include <span>
#include <vector>

#include "trajcl/env.hpp"
#include "trajcl/nn/mlp.hpp"
#include "trajcl/nn/param_vector.hpp"
#include "trajcl/rng.hpp"

namespace trajcl::policy {

using env::Transition;

/// Actor network: (s ++ z) -> (mean, raw std) per action dimension.
struct ActorParams {
  nn::MlpSpec spec;
  nn::ParamVector params;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t context_dim = 0;

  static ActorParams create(std::size_t state_dim, std::size_t action_dim,
                            std::size_t context_dim, const std::vector<std::size_t>& hidden,
                            Rng& rng);
};

/// Twin critics (s ++ a ++ z) -> scalar, plus their targets.
struct CriticParams {
  nn::MlpSpec spec;
  nn::ParamVector q1, q2, q1_target, q2_target;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t context_dim = 0;

  /// Targets start as copies of the live critics.
  static CriticParams create(std::size_t state_dim, std::size_t action_dim,
                             std::size_t context_dim, const std::vector<std::size_t>& hidden,
                             Rng& rng);
};

struct SacConfig {
  double discount = 0.99;
  double entropy_weight = 0.2;
  double reward_scale = 10.0;
  double target_rate = 0.005;
};

/// One reparameterized action draw with everything its gradient needs.
struct ActionSample {
  std::vector<double> action;    // tanh(pre_tanh)
  std::vector<double> pre_tanh;  // mean + std * noise
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<double> raw_std;
  std::vector<double> noise;
  double log_prob = 0.0;  // includes the tanh change of variables
};

ActionSample sample_action(const ActorParams& actor, std::span<const double> state,
                           std::span<const double> z, Rng& rng);

/// Deterministic mode returns tanh(mean) and draws nothing from rng.
std::vector<double> policy_act(const ActorParams& actor, std::span<const double> state,
                               std::span<const double> z, Rng& rng, bool deterministic);

/// log pi(a) for a = tanh(u), u ~ N(mean, std^2) per dimension.
double squashed_gaussian_log_prob(std::span<const double> pre_tanh,
                                  std::span<const double> mean, std::span<const double> std);

/// Transitions from one task sharing one context sample z.
struct RlBatch {
  std::vector<Transition> transitions;
  std::vector<double> z;
  int task_id = 0;
};

struct CriticLossResult {
  double loss = 0.0;  // mean (Q1 - y)^2 + mean (Q2 - y)^2
  std::vector<double> grad_q1;
  std::vector<double> grad_q2;
  std::vector<double> grad_z;  // d loss / d z through both live critics
  std::vector<double> targets;
};

/// Soft Bellman residual. Targets use the target critics and a fresh action
/// from the actor at s'; they are constants for differentiation.
CriticLossResult critic_loss(const CriticParams& critics, const ActorParams& actor,
                             const RlBatch& batch, const SacConfig& config, Rng& rng);

struct ActorLossResult {
  double loss = 0.0;  // mean (alpha * log pi - min(Q1, Q2))
  std::vector<double> grad_actor;
  double mean_log_prob = 0.0;
};

/// z is treated as a constant: nothing flows back to the encoder.
ActorLossResult actor_loss(const ActorParams& actor, const CriticParams& critics,
                           const RlBatch& batch, double entropy_weight, Rng& rng);

/// target <- (1 - rate) * target + rate * live. Throws ConfigError unless
/// rate in [0, 1].
void soft_update_targets(CriticParams& critics, double rate);

double q_value(const nn::MlpSpec& spec, const nn::ParamVector& q, std::span<const double> state,
               std::span<const double> action, std::span<const double> z);

}  // namespace trajcl::policy
