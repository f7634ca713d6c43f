#pragma once

// Point-mass task families. Task identity (goal, target velocity, drag) enters
// only through rewards and dynamics, never through the observed state.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trajcl/rng.hpp"

namespace trajcl::env {

enum class TaskFamily {
  point_goal_2d,  // reward-goal variation
  point_vel_1d,   // reward-parameter variation
  point_drag_2d,  // dynamics variation
};

std::string_view to_string(TaskFamily f);
/// Accepts "point-goal-2d", "point-vel-1d", "point-drag-2d". Throws ConfigError.
TaskFamily parse_family(std::string_view name);

std::size_t state_dim(TaskFamily f);
std::size_t action_dim(TaskFamily f);
std::size_t task_vector_dim(TaskFamily f);

struct TaskSpec {
  TaskFamily family = TaskFamily::point_goal_2d;
  std::vector<double> task_vector;
  int horizon = 64;
  double discount = 0.99;

  void validate() const;
  bool operator==(const TaskSpec&) const = default;
};

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;

  bool operator==(const Transition&) const = default;
};

struct Trajectory {
  std::vector<Transition> transitions;
  int task_id = 0;
  std::int64_t trajectory_id = 0;

  std::size_t size() const { return transitions.size(); }
  /// Undiscounted return.
  double total_reward() const;
  bool operator==(const Trajectory&) const = default;
};

struct TaskSplit {
  std::vector<TaskSpec> train_tasks;
  std::vector<TaskSpec> test_tasks;
  std::uint64_t seed = 0;

  bool operator==(const TaskSplit&) const = default;
};

/// Train and test task vectors drawn i.i.d. from the family's distribution.
TaskSplit sample_task_split(TaskFamily family, int n_train, int n_test, std::uint64_t seed,
                            int horizon = 64, double discount = 0.99);

std::vector<double> env_reset(const TaskSpec& task, Rng& rng);

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
};

/// Deterministic dynamics. Action components are clipped to [-1, 1].
StepResult env_step(const TaskSpec& task, std::span<const double> state,
                    std::span<const double> action);

using ActionFn = std::function<std::vector<double>(std::span<const double> state)>;

/// Runs `policy` from `initial_state` for the task horizon.
Trajectory rollout(const TaskSpec& task, std::vector<double> initial_state,
                   const ActionFn& policy, int task_id, std::int64_t trajectory_id);

/// Ground-truth task vector zero-padded to `context_dim`.
std::vector<double> oracle_context(const TaskSpec& task, std::size_t context_dim);

/// Goal used by point-drag-2d rewards.
inline constexpr double kDragGoal[2] = {0.5, 0.5};

// Structured-text (JSON) form of a split, so runs can be replayed.
std::string split_to_json(const TaskSplit& split);
TaskSplit split_from_json(std::string_view text);

}  // namespace trajcl::env
