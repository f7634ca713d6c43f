#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>
#include <string>

#include "trajcl/errors.hpp"
#include "trajcl/trainer.hpp"

namespace trajcl::trainer {
namespace {

env::TaskSplit checked_split(const TrainConfig& config, env::TaskSplit split) {
  if (split.train_tasks.size() != static_cast<std::size_t>(config.n_train) ||
      split.test_tasks.size() != static_cast<std::size_t>(config.n_test)) {
    throw ConfigError("task split sizes do not match n_train / n_test");
  }
  for (const auto* list : {&split.train_tasks, &split.test_tasks}) {
    for (const auto& t : *list) {
      t.validate();
      if (t.family != config.family) throw ConfigError("task split family differs from config");
    }
  }
  return split;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void add_into(std::vector<double>& acc, const std::vector<double>& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

}  // namespace

Trainer::Trainer(TrainConfig config)
    : Trainer(config, env::sample_task_split(config.family, config.n_train, config.n_test,
                                             config.seed, config.horizon, config.discount)) {}

Trainer::Trainer(TrainConfig config, env::TaskSplit split)
    : config_((config.validate(), std::move(config))),
      split_(checked_split(config_, std::move(split))),
      train_rng_(make_rng(config_.seed, "train")) {
  Rng init = make_rng(config_.seed, "init");
  agent_ = Agent::create(config_, init);
  for (int t = 0; t < config_.n_train; ++t) buffers_.emplace_back(t, config_.buffer_capacity);
  adam_encoder_ = nn::AdamState::for_size(agent_.encoder.query_params.size());
  adam_actor_ = nn::AdamState::for_size(agent_.actor.params.size());
  adam_q1_ = nn::AdamState::for_size(agent_.critics.q1.size());
  adam_q2_ = nn::AdamState::for_size(agent_.critics.q2.size());
}

std::int64_t Trainer::steps_per_collection() const {
  return static_cast<std::int64_t>(config_.n_train) * (config_.n_prior + config_.n_posterior) *
         config_.horizon;
}

std::vector<Rollout> Trainer::collect_task(std::size_t task, RolloutMode mode, int count,
                                           std::int64_t first_id, Rng& rng) const {
  const auto& spec = split_.train_tasks[task];
  std::vector<double> oracle;
  if (config_.mode == Mode::oracle) oracle = env::oracle_context(spec, config_.context_dim);
  return collect_rollouts(spec, static_cast<int>(task), mode, count, agent_, &buffers_[task],
                          config_.window, first_id, rng, oracle);
}

double Trainer::run_collection(const std::vector<std::pair<RolloutMode, int>>& plan,
                               std::uint64_t phase_index) {
  int per_task = 0;
  for (const auto& [mode, count] : plan) per_task += count;
  const std::int64_t base = next_trajectory_id_;

  // Each task touches only its own buffer and rng stream, so the schedule
  // cannot change the result.
  auto work = [&, base, per_task](std::size_t t) {
    Rng rng = make_rng(config_.seed, "collect", {phase_index, t});
    std::int64_t id = base + static_cast<std::int64_t>(t) * per_task;
    double total = 0.0;
    for (const auto& [mode, count] : plan) {
      for (auto& r : collect_task(t, mode, count, id, rng)) {
        total += r.trajectory.total_reward();
        buffers_[t].add_trajectory(std::move(r.trajectory));
      }
      id += count;
    }
    return total;
  };

  const std::size_t n = buffers_.size();
  std::vector<double> totals(n, 0.0);
  if (config_.parallel_collection) {
    std::vector<std::future<double>> futures;
    for (std::size_t t = 0; t < n; ++t) futures.push_back(std::async(std::launch::async, work, t));
    for (std::size_t t = 0; t < n; ++t) totals[t] = futures[t].get();
  } else {
    for (std::size_t t = 0; t < n; ++t) totals[t] = work(t);
  }

  const std::int64_t trajectories = static_cast<std::int64_t>(n) * per_task;
  next_trajectory_id_ += trajectories;
  env_steps_ += trajectories * config_.horizon;
  return std::accumulate(totals.begin(), totals.end(), 0.0) / static_cast<double>(trajectories);
}

void Trainer::warmup() {
  if (warmed_up_) throw UsageError("warmup already ran");
  run_collection({{RolloutMode::prior, 1}}, 0);
  warmed_up_ = true;
}

double Trainer::collect() {
  if (!warmed_up_) throw UsageError("collect() before warmup()");
  return run_collection({{RolloutMode::prior, config_.n_prior},
                         {RolloutMode::posterior, config_.n_posterior}},
                        static_cast<std::uint64_t>(iteration_) + 1);
}

std::vector<int> Trainer::sample_meta_batch() {
  const std::size_t n = static_cast<std::size_t>(config_.n_train);
  const std::size_t b = config_.effective_meta_batch();
  std::vector<int> ids;
  if (config_.same_task_negatives) {
    for (std::size_t i = 0; i < b; ++i) ids.push_back(static_cast<int>(uniform_index(train_rng_, n)));
    return ids;
  }
  // Partial Fisher-Yates: b distinct tasks.
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t j = i + uniform_index(train_rng_, n - i);
    std::swap(pool[i], pool[j]);
  }
  ids.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(b));
  return ids;
}

StepStats Trainer::train_step() {
  if (!warmed_up_) throw UsageError("train_step() before warmup()");
  const bool oracle = config_.mode == Mode::oracle;
  const bool tcl = config_.mode == Mode::tcl;
  const bool use_tcl_loss = tcl && config_.tcl_scale > 0.0;
  const std::size_t d = config_.context_dim;
  const policy::SacConfig sac{config_.discount, config_.entropy_weight, config_.reward_scale,
                              config_.target_rate};

  const auto tasks = sample_meta_batch();
  const std::size_t n = tasks.size();
  QueryKeySets sets;
  if (!oracle) {
    sets = build_query_key_sets(buffers_, agent_.encoder, tasks, config_.window, train_rng_,
                                use_tcl_loss);
  }

  std::vector<double> g_actor(agent_.actor.params.size(), 0.0);
  std::vector<double> g_q1(agent_.critics.q1.size(), 0.0);
  std::vector<double> g_q2(agent_.critics.q2.size(), 0.0);
  std::vector<std::vector<double>> d_mean(n, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> d_std(n, std::vector<double>(d, 0.0));

  // Critic and actor losses are averaged over the meta-batch; KL is summed
  // over it.
  const double inv_n = 1.0 / static_cast<double>(n);
  StepStats stats;
  double sum_q = 0.0, sum_pi = 0.0, sum_kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(tasks[i]);
    policy::RlBatch batch;
    batch.task_id = tasks[i];
    encoder::ContextEmbedding emb;
    if (oracle) {
      batch.z = env::oracle_context(split_.train_tasks[t], d);
    } else {
      // The TCL query posterior doubles as this task's RL conditioning.
      emb = encoder::sample_z(sets.query_encodings[i].posterior(), train_rng_);
      batch.z = emb.z;
    }
    batch.transitions =
        buffers_[t].sample_rl_batch(static_cast<std::size_t>(config_.rl_batch), train_rng_);

    const auto critic = policy::critic_loss(agent_.critics, agent_.actor, batch, sac, train_rng_);
    const auto actor = policy::actor_loss(agent_.actor, agent_.critics, batch,
                                          config_.entropy_weight, train_rng_);
    sum_q += critic.loss;
    sum_pi += actor.loss;
    add_into(g_q1, critic.grad_q1);
    add_into(g_q2, critic.grad_q2);
    add_into(g_actor, actor.grad_actor);

    if (!oracle) {
      const auto& post = emb.posterior;
      for (std::size_t j = 0; j < d; ++j) {
        d_mean[i][j] += inv_n * critic.grad_z[j];
        d_std[i][j] += inv_n * critic.grad_z[j] * emb.noise[j];
      }
      sum_kl += encoder::kl_to_unit_prior(post);
      encoder::kl_to_unit_prior_backward(post, config_.kl_weight, d_mean[i], d_std[i]);
    }
  }
  for (auto* g : {&g_actor, &g_q1, &g_q2}) {
    for (auto& v : *g) v *= inv_n;
  }
  stats.loss_q = sum_q * inv_n;
  stats.loss_pi = sum_pi * inv_n;
  if (!oracle) stats.kl = sum_kl * inv_n;

  if (use_tcl_loss) {
    const auto report = contrastive::tcl_loss(sets.batch, config_.temperature);
    stats.loss_tcl = report.loss;
    stats.tcl_acc = report.accuracy;
    const auto g = contrastive::tcl_loss_backward(sets.batch, config_.temperature,
                                                  config_.tcl_scale);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        d_mean[i][j] += g.query_mean[i][j];
        d_std[i][j] += g.query_std[i][j];
      }
    }
  }

  std::vector<double> g_enc;
  if (!oracle) {
    g_enc.assign(agent_.encoder.query_params.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sets.query_encodings[i].backward(agent_.encoder.spec, agent_.encoder.query_params,
                                       d_mean[i], d_std[i], g_enc);
    }
  }

  const bool finite = std::isfinite(stats.loss_q) && std::isfinite(stats.loss_pi) &&
                      (oracle || std::isfinite(stats.kl)) &&
                      (!use_tcl_loss || std::isfinite(stats.loss_tcl)) && all_finite(g_enc) &&
                      all_finite(g_actor) && all_finite(g_q1) && all_finite(g_q2);
  if (!finite) {
    std::ostringstream msg;
    msg << "non-finite loss or gradient at iteration " << iteration_ << ", update "
        << update_count_ << ": loss_q=" << stats.loss_q << " loss_pi=" << stats.loss_pi
        << " kl=" << stats.kl << " loss_tcl=" << stats.loss_tcl << "; batch tasks [";
    for (std::size_t i = 0; i < n; ++i) {
      msg << (i ? " " : "") << tasks[i];
      if (!oracle) msg << ":traj" << sets.query_sources[i];
    }
    msg << "]";
    throw NonFiniteError(msg.str());
  }

  if (!oracle) {
    nn::adam_step(agent_.encoder.query_params.values(), g_enc, adam_encoder_, config_.lr_encoder);
    if (tcl) encoder::ema_update(agent_.encoder, config_.momentum);
  }
  nn::adam_step(agent_.actor.params.values(), g_actor, adam_actor_, config_.lr_policy);
  nn::adam_step(agent_.critics.q1.values(), g_q1, adam_q1_, config_.lr_policy);
  nn::adam_step(agent_.critics.q2.values(), g_q2, adam_q2_, config_.lr_policy);
  policy::soft_update_targets(agent_.critics, config_.target_rate);

  last_encoder_grad_ = std::move(g_enc);
  ++update_count_;
  return stats;
}

MetricsRecord Trainer::run_iteration(bool evaluate) {
  MetricsRecord rec;
  rec.return_train = collect();
  StepStats mean;
  mean.loss_q = mean.loss_pi = 0.0;
  double tcl_sum = 0.0, acc_sum = 0.0, kl_sum = 0.0;
  for (int s = 0; s < config_.steps_per_iteration; ++s) {
    const auto st = train_step();
    tcl_sum += st.loss_tcl;
    acc_sum += st.tcl_acc;
    kl_sum += st.kl;
    mean.loss_q += st.loss_q;
    mean.loss_pi += st.loss_pi;
  }
  const double inv = 1.0 / config_.steps_per_iteration;
  ++iteration_;
  rec.iteration = iteration_;
  rec.env_steps = env_steps_;
  // NaN sums stay NaN, marking losses that the mode does not compute.
  rec.loss_tcl = tcl_sum * inv;
  rec.tcl_acc = acc_sum * inv;
  rec.kl = kl_sum * inv;
  rec.loss_q = mean.loss_q * inv;
  rec.loss_pi = mean.loss_pi * inv;
  if (evaluate) {
    Rng rng = make_rng(config_.seed, "eval", {static_cast<std::uint64_t>(iteration_)});
    rec.return_test = evaluate_test_tasks(rng).mean();
  }
  return rec;
}

MetaTestResult Trainer::evaluate_test_tasks(Rng& rng) const {
  return meta_test(agent_, config_.mode, split_.test_tasks, config_.n_exploration, config_.n_eval,
                   rng);
}

double Trainer::probe_contrastive_accuracy(int batches, Rng& rng) const {
  if (batches < 1) throw ConfigError("probe needs at least one batch");
  if (config_.mode == Mode::oracle) throw UsageError("oracle mode has no encoder to probe");
  // Baseline keeps no key encoder; its probe compares query against query.
  encoder::EncoderPair pair = agent_.encoder;
  if (config_.mode != Mode::tcl) pair.key_params = pair.query_params;
  std::vector<int> all(static_cast<std::size_t>(config_.n_train));
  std::iota(all.begin(), all.end(), 0);
  double acc = 0.0;
  for (int b = 0; b < batches; ++b) {
    const auto sets = build_query_key_sets(buffers_, pair, all, config_.window, rng, true);
    acc += contrastive::tcl_loss(sets.batch, config_.temperature).accuracy;
  }
  return acc / batches;
}

Checkpoint Trainer::checkpoint() const {
  return Checkpoint{config_, split_, agent_, iteration_, env_steps_};
}

MetaTrainResult meta_train(const TrainConfig& config,
                           const std::optional<std::filesystem::path>& run_dir) {
  Trainer trainer(config);
  std::ofstream csv;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir / "checkpoints");
    csv.open(*run_dir / "metrics.csv");
    if (!csv) throw std::runtime_error("cannot write " + (*run_dir / "metrics.csv").string());
    csv << metrics_csv_header() << '\n';
  }

  MetaTrainResult result;
  trainer.warmup();
  const std::int64_t phase = trainer.steps_per_collection();
  const std::int64_t remaining = config.env_step_budget - trainer.env_steps();
  const std::int64_t n_iters = remaining > 0 ? remaining / phase : 0;
  for (std::int64_t it = 0; it < n_iters; ++it) {
    const bool evaluate = (it + 1) % config.eval_interval == 0 || it + 1 == n_iters;
    result.log.push_back(trainer.run_iteration(evaluate));
    if (run_dir) {
      csv << metrics_csv_row(result.log.back()) << '\n' << std::flush;
      if (evaluate) {
        const auto path =
            *run_dir / "checkpoints" / ("iter_" + std::to_string(trainer.iteration()) + ".json");
        save_checkpoint(trainer.checkpoint(), path);
        result.checkpoint_paths.push_back(path);
      }
    }
  }
  result.final_checkpoint = trainer.checkpoint();
  if (run_dir) {
    const auto path = *run_dir / "checkpoints" / "final.json";
    save_checkpoint(result.final_checkpoint, path);
    result.checkpoint_paths.push_back(path);
  }
  return result;
}

}  // namespace trajcl::trainer
