#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "trajcl/errors.hpp"
#include "trajcl/trainer.hpp"

namespace trajcl::trainer {

std::vector<Rollout> collect_rollouts(const env::TaskSpec& task, int task_id, RolloutMode mode,
                                      int count, const Agent& agent,
                                      const replay::TaskReplayBuffer* buffer, std::size_t window,
                                      std::int64_t first_trajectory_id, Rng& rng,
                                      std::span<const double> fixed_context) {
  std::vector<Rollout> out;
  if (count <= 0) return out;
  const std::size_t d = agent.encoder.context_dim;
  const bool fixed = !fixed_context.empty();
  if (fixed && fixed_context.size() != d) throw ConfigError("fixed context has wrong dimension");
  if (!fixed && mode == RolloutMode::posterior && (buffer == nullptr || buffer->empty())) {
    throw EmptyBufferError("posterior rollouts need a non-empty buffer for task " +
                           std::to_string(task_id));
  }
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    Rollout r;
    if (fixed) {
      r.z.assign(fixed_context.begin(), fixed_context.end());
      r.z_source = {r.z, std::vector<double>(d, encoder::kStdFloor)};
    } else if (mode == RolloutMode::prior) {
      r.z_source = encoder::PosteriorGaussian::unit(d);
      r.z = encoder::sample_z(r.z_source, rng).z;
    } else {
      const auto w = buffer->sample_window(window, rng);
      r.z_source = encoder::infer_posterior(agent.encoder, w.transitions);
      r.z = encoder::sample_z(r.z_source, rng).z;
    }
    const auto& z = r.z;
    auto act = [&](std::span<const double> s) {
      return policy::policy_act(agent.actor, s, z, rng, false);
    };
    r.trajectory = env::rollout(task, env::env_reset(task, rng), act, task_id,
                                first_trajectory_id + k);
    out.push_back(std::move(r));
  }
  return out;
}

QueryKeySets build_query_key_sets(const std::vector<replay::TaskReplayBuffer>& buffers,
                                  const encoder::EncoderPair& pair,
                                  const std::vector<int>& task_ids, std::size_t window, Rng& rng,
                                  bool encode_keys) {
  QueryKeySets s;
  s.query_encodings.reserve(task_ids.size());
  for (const int t : task_ids) {
    if (t < 0 || static_cast<std::size_t>(t) >= buffers.size()) {
      throw ConfigError("task id " + std::to_string(t) + " has no buffer");
    }
    auto [qw, kw] = buffers[static_cast<std::size_t>(t)].sample_window_pair(window, rng);
    s.query_encodings.emplace_back(pair.spec, pair.query_params, pair.context_dim,
                                   qw.transitions);
    s.batch.queries.push_back(s.query_encodings.back().posterior());
    if (encode_keys) {
      s.batch.keys.push_back(encoder::infer_posterior(pair, kw.transitions, /*use_key=*/true));
    }
    s.query_sources.push_back(qw.source_trajectory_id);
    s.key_sources.push_back(kw.source_trajectory_id);
    s.task_ids.push_back(t);
  }
  return s;
}

double MetaTestResult::mean() const {
  if (per_task_mean.empty()) return kNan;
  return std::accumulate(per_task_mean.begin(), per_task_mean.end(), 0.0) /
         static_cast<double>(per_task_mean.size());
}

MetaTestResult meta_test(const Agent& agent, Mode mode, const std::vector<env::TaskSpec>& tasks,
                         int n_exploration, int n_eval, Rng& rng) {
  if (n_eval < 1) throw ConfigError("n_eval must be >= 1");
  if (mode != Mode::oracle && n_exploration < 1) throw ConfigError("n_exploration must be >= 1");
  const std::size_t d = agent.encoder.context_dim;
  MetaTestResult result;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    const int id = static_cast<int>(t);
    std::vector<double> z;
    if (mode == Mode::oracle) {
      z = env::oracle_context(task, d);
    } else {
      const auto explore = collect_rollouts(task, id, RolloutMode::prior, n_exploration, agent,
                                            nullptr, 0, 0, rng);
      std::vector<env::Transition> context;
      for (const auto& r : explore) {
        context.insert(context.end(), r.trajectory.transitions.begin(),
                       r.trajectory.transitions.end());
      }
      z = encoder::sample_z(encoder::infer_posterior(agent.encoder, context), rng).z;
    }
    auto act = [&](std::span<const double> s) {
      return policy::policy_act(agent.actor, s, z, rng, true);
    };
    std::vector<double> returns;
    for (int k = 0; k < n_eval; ++k) {
      returns.push_back(env::rollout(task, env::env_reset(task, rng), act, id, k).total_reward());
    }
    result.per_task_mean.push_back(std::accumulate(returns.begin(), returns.end(), 0.0) /
                                   static_cast<double>(returns.size()));
    result.per_task_returns.push_back(std::move(returns));
  }
  return result;
}

MetaTestResult random_policy_test(const std::vector<env::TaskSpec>& tasks, int n_eval, Rng& rng) {
  if (n_eval < 1) throw ConfigError("n_eval must be >= 1");
  MetaTestResult result;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    const std::size_t ad = env::action_dim(task.family);
    auto act = [&](std::span<const double>) {
      std::vector<double> a(ad);
      for (auto& x : a) x = uniform(rng, -1.0, 1.0);
      return a;
    };
    std::vector<double> returns;
    for (int k = 0; k < n_eval; ++k) {
      returns.push_back(
          env::rollout(task, env::env_reset(task, rng), act, static_cast<int>(t), k).total_reward());
    }
    result.per_task_mean.push_back(std::accumulate(returns.begin(), returns.end(), 0.0) /
                                   static_cast<double>(returns.size()));
    result.per_task_returns.push_back(std::move(returns));
  }
  return result;
}

std::string metrics_csv_header() {
  return "step,loss_tcl,tcl_acc,loss_q,loss_pi,kl,return_train,return_test";
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string metrics_csv_row(const MetricsRecord& r) {
  std::string row = std::to_string(r.env_steps);
  for (const double v : {r.loss_tcl, r.tcl_acc, r.loss_q, r.loss_pi, r.kl, r.return_train,
                         r.return_test}) {
    row += ',';
    row += fmt(v);
  }
  return row;
}

}  // namespace trajcl::trainer
