#pragma once

// Meta-training loop: per-task replay buffers, prior/posterior data
// collection, the joint contrastive + soft actor-critic update, momentum key
// tracking, and the fixed-parameter meta-test protocol.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trajcl/contrastive.hpp"
#include "trajcl/encoder.hpp"
#include "trajcl/env.hpp"
#include "trajcl/nn/adam.hpp"
#include "trajcl/policy.hpp"
#include "trajcl/replay.hpp"
#include "trajcl/rng.hpp"

namespace trajcl::trainer {

enum class Mode {
  tcl,       // contrastive auxiliary loss + momentum key encoder
  baseline,  // encoder trained by the critic and KL only
  oracle,    // ground-truth task vector as context, no encoder
};

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

struct TrainConfig {
  env::TaskFamily family = env::TaskFamily::point_goal_2d;
  int n_train = 8;
  int n_test = 4;
  int horizon = 64;
  double discount = 0.99;

  std::size_t context_dim = 5;
  std::vector<std::size_t> encoder_hidden{200, 200};
  std::vector<std::size_t> policy_hidden{64, 64};

  std::size_t window = 16;
  double tcl_scale = 5.0;
  double temperature = 1.0;
  double momentum = 0.995;
  double kl_weight = 0.1;
  bool same_task_negatives = false;

  double lr_encoder = 3e-4;
  double lr_policy = 3e-4;
  double entropy_weight = 0.2;
  double reward_scale = 10.0;
  double target_rate = 0.005;

  int n_prior = 1;
  int n_posterior = 1;
  int steps_per_iteration = 50;
  std::int64_t env_step_budget = 200'000;
  int meta_batch = 0;  // 0: every train task
  int rl_batch = 64;
  std::size_t buffer_capacity = replay::kDefaultCapacity;

  int eval_interval = 10;  // iterations between meta-test evaluations
  int n_exploration = 2;
  int n_eval = 2;
  bool parallel_collection = false;

  std::uint64_t seed = 1;
  Mode mode = Mode::tcl;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  std::size_t effective_meta_batch() const;

  nlohmann::json to_json() const;
  /// Starts from `base` and applies every key in `j`. Unknown keys and
  /// wrongly-typed values throw ConfigError listing the keys.
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& base);
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Named presets: "desk" (defaults), "smoke" (seconds-scale), "mujoco-analogue",
/// "metaworld-analogue". Throws ConfigError for unknown names.
TrainConfig preset(std::string_view name);

/// All learned parameters.
struct Agent {
  encoder::EncoderPair encoder;
  policy::ActorParams actor;
  policy::CriticParams critics;

  static Agent create(const TrainConfig& config, Rng& rng);
};

struct Checkpoint {
  TrainConfig config;
  env::TaskSplit split;
  Agent agent;
  int iteration = 0;
  std::int64_t env_steps = 0;
};

/// JSON with a per-network layout manifest and flat value arrays.
nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
/// Throws ConfigError when layouts disagree with the embedded config.
Checkpoint checkpoint_from_json(const nlohmann::json& j);
/// Write to a temporary sibling, then rename.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

enum class RolloutMode { prior, posterior };

struct Rollout {
  env::Trajectory trajectory;
  encoder::PosteriorGaussian z_source;  // distribution z was drawn from
  std::vector<double> z;
};

/// Runs `count` stochastic-policy rollouts. Prior mode draws z ~ N(0, I)
/// per rollout; posterior mode encodes a window sampled from `buffer` with
/// the query encoder. A non-empty `fixed_context` (oracle) replaces z.
/// Trajectory ids are first_trajectory_id, first_trajectory_id + 1, ...
std::vector<Rollout> collect_rollouts(const env::TaskSpec& task, int task_id,
                                      RolloutMode mode, int count, const Agent& agent,
                                      const replay::TaskReplayBuffer* buffer,
                                      std::size_t window, std::int64_t first_trajectory_id,
                                      Rng& rng, std::span<const double> fixed_context = {});

/// Query/key sets for one training step. Index i is a same-trajectory pair.
struct QueryKeySets {
  contrastive::QueryKeyBatch batch;  // keys empty when !encode_keys
  std::vector<encoder::WindowEncoding> query_encodings;
  std::vector<std::int64_t> query_sources;
  std::vector<std::int64_t> key_sources;
  std::vector<int> task_ids;
};

QueryKeySets build_query_key_sets(const std::vector<replay::TaskReplayBuffer>& buffers,
                                  const encoder::EncoderPair& pair,
                                  const std::vector<int>& task_ids, std::size_t window,
                                  Rng& rng, bool encode_keys = true);

inline constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

struct StepStats {
  double loss_tcl = kNan;
  double tcl_acc = kNan;
  double loss_q = 0.0;   // mean over tasks
  double loss_pi = 0.0;  // mean over tasks
  double kl = kNan;      // mean over tasks
};

struct MetricsRecord {
  int iteration = 0;
  std::int64_t env_steps = 0;
  double loss_tcl = kNan;
  double tcl_acc = kNan;
  double loss_q = kNan;
  double loss_pi = kNan;
  double kl = kNan;
  double return_train = kNan;
  double return_test = kNan;
};

/// step,loss_tcl,tcl_acc,loss_q,loss_pi,kl,return_train,return_test
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);

struct MetaTestResult {
  std::vector<double> per_task_mean;
  std::vector<std::vector<double>> per_task_returns;
  double mean() const;
};

/// Adaptation with frozen parameters: n_exploration prior rollouts per task,
/// a posterior over all their transitions, then n_eval deterministic
/// rollouts conditioned on one z drawn from it. Oracle mode skips
/// exploration and uses the task vector.
MetaTestResult meta_test(const Agent& agent, Mode mode, const std::vector<env::TaskSpec>& tasks,
                         int n_exploration, int n_eval, Rng& rng);

/// Same protocol with uniformly random actions; reference for oracle runs.
MetaTestResult random_policy_test(const std::vector<env::TaskSpec>& tasks, int n_eval, Rng& rng);

class Trainer {
 public:
  explicit Trainer(TrainConfig config);
  Trainer(TrainConfig config, env::TaskSplit split);

  /// One prior rollout per train task. Must precede training.
  void warmup();
  /// Collection phase: n_prior prior + n_posterior posterior rollouts per
  /// train task. Returns mean undiscounted return of the new trajectories.
  double collect();
  /// One gradient step on encoder, actor and critics.
  StepStats train_step();
  /// collect() followed by steps_per_iteration train_step() calls, with a
  /// meta-test when `evaluate` is set.
  MetricsRecord run_iteration(bool evaluate);

  MetaTestResult evaluate_test_tasks(Rng& rng) const;
  /// Mean diagonal accuracy over `batches` fresh query/key draws with the
  /// current encoders; consumes only `rng`.
  double probe_contrastive_accuracy(int batches, Rng& rng) const;

  const TrainConfig& config() const { return config_; }
  const env::TaskSplit& split() const { return split_; }
  const Agent& agent() const { return agent_; }
  Agent& mutable_agent() { return agent_; }
  std::vector<replay::TaskReplayBuffer>& buffers() { return buffers_; }
  const std::vector<replay::TaskReplayBuffer>& buffers() const { return buffers_; }
  std::int64_t env_steps() const { return env_steps_; }
  int iteration() const { return iteration_; }
  /// Number of parameter updates applied so far.
  std::uint64_t update_count() const { return update_count_; }
  /// Encoder gradient of the most recent train_step.
  const std::vector<double>& last_encoder_gradient() const { return last_encoder_grad_; }
  std::int64_t steps_per_collection() const;

  Checkpoint checkpoint() const;

 private:
  std::vector<int> sample_meta_batch();
  std::vector<Rollout> collect_task(std::size_t task, RolloutMode mode, int count,
                                    std::int64_t first_id, Rng& rng) const;
  double run_collection(const std::vector<std::pair<RolloutMode, int>>& plan,
                        std::uint64_t phase_index);

  TrainConfig config_;
  env::TaskSplit split_;
  Agent agent_;
  std::vector<replay::TaskReplayBuffer> buffers_;
  nn::AdamState adam_encoder_, adam_actor_, adam_q1_, adam_q2_;
  Rng train_rng_;
  std::int64_t env_steps_ = 0;
  std::int64_t next_trajectory_id_ = 0;
  int iteration_ = 0;
  bool warmed_up_ = false;
  std::uint64_t update_count_ = 0;
  std::vector<double> last_encoder_grad_;
};

struct MetaTrainResult {
  std::vector<MetricsRecord> log;
  Checkpoint final_checkpoint;
  std::vector<std::filesystem::path> checkpoint_paths;
};

/// Warmup, then collection + training iterations while the next collection
/// phase fits in the environment-step budget. When `run_dir` is set, writes
/// metrics.csv and checkpoints/ there.
MetaTrainResult meta_train(const TrainConfig& config,
                           const std::optional<std::filesystem::path>& run_dir = std::nullopt);

}  // namespace trajcl::trainer
