#include "trajcl/env.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "trajcl/errors.hpp"

namespace trajcl::env {

std::string_view to_string(TaskFamily f) {
  switch (f) {
    case TaskFamily::point_goal_2d: return "point-goal-2d";
    case TaskFamily::point_vel_1d: return "point-vel-1d";
    case TaskFamily::point_drag_2d: return "point-drag-2d";
  }
  return "?";
}

TaskFamily parse_family(std::string_view name) {
  if (name == "point-goal-2d") return TaskFamily::point_goal_2d;
  if (name == "point-vel-1d") return TaskFamily::point_vel_1d;
  if (name == "point-drag-2d") return TaskFamily::point_drag_2d;
  throw ConfigError("unknown task family '" + std::string(name) + "'");
}

std::size_t state_dim(TaskFamily f) { return f == TaskFamily::point_vel_1d ? 2 : 4; }
std::size_t action_dim(TaskFamily f) { return f == TaskFamily::point_vel_1d ? 1 : 2; }
std::size_t task_vector_dim(TaskFamily f) { return f == TaskFamily::point_goal_2d ? 2 : 1; }

void TaskSpec::validate() const {
  if (task_vector.size() != task_vector_dim(family)) {
    throw ConfigError(std::string(to_string(family)) + " task vector must have " +
                      std::to_string(task_vector_dim(family)) + " entries");
  }
  if (horizon < 1) throw ConfigError("task horizon must be >= 1");
  if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("discount must be in [0,1]");
}

namespace {

std::vector<double> draw_task_vector(TaskFamily family, Rng& rng) {
  switch (family) {
    case TaskFamily::point_goal_2d: {
      const double x = uniform(rng, -1.0, 1.0);
      const double y = uniform(rng, -1.0, 1.0);
      return {x, y};
    }
    case TaskFamily::point_vel_1d: return {uniform(rng, 0.5, 2.0)};
    case TaskFamily::point_drag_2d: return {uniform(rng, 0.1, 2.0)};
  }
  return {};
}

double clip_unit(double a) { return std::clamp(a, -1.0, 1.0); }

}  // namespace

TaskSplit sample_task_split(TaskFamily family, int n_train, int n_test, std::uint64_t seed,
                            int horizon, double discount) {
  if (n_train < 1 || n_test < 1) throw ConfigError("task split needs n_train, n_test >= 1");
  Rng rng = make_rng(seed, "task-split");
  TaskSplit split;
  split.seed = seed;
  std::vector<std::vector<double>> seen;
  auto draw = [&] {
    // Continuous draws; a repeat would break disjointness, so redraw.
    for (;;) {
      auto v = draw_task_vector(family, rng);
      if (std::find(seen.begin(), seen.end(), v) == seen.end()) {
        seen.push_back(v);
        return TaskSpec{family, std::move(v), horizon, discount};
      }
    }
  };
  for (int i = 0; i < n_train; ++i) split.train_tasks.push_back(draw());
  for (int i = 0; i < n_test; ++i) split.test_tasks.push_back(draw());
  for (const auto& t : split.train_tasks) t.validate();
  return split;
}

std::vector<double> env_reset(const TaskSpec& task, Rng& rng) {
  switch (task.family) {
    case TaskFamily::point_goal_2d:
    case TaskFamily::point_drag_2d: {
      const double x = uniform(rng, -0.1, 0.1);
      const double y = uniform(rng, -0.1, 0.1);
      return {x, y, 0.0, 0.0};
    }
    case TaskFamily::point_vel_1d: return {0.0, 0.0};
  }
  return {};
}

StepResult env_step(const TaskSpec& task, std::span<const double> state,
                    std::span<const double> action) {
  const std::size_t sd = state_dim(task.family);
  const std::size_t ad = action_dim(task.family);
  if (state.size() != sd || action.size() != ad) {
    throw ConfigError("env_step: state/action dimension mismatch");
  }
  StepResult r;
  r.next_state.assign(state.begin(), state.end());
  auto& s = r.next_state;
  switch (task.family) {
    case TaskFamily::point_goal_2d: {
      // State is (position, last displacement rate).
      for (int i = 0; i < 2; ++i) {
        const double a = clip_unit(action[i]);
        s[i] = state[i] + 0.1 * a;
        s[2 + i] = 0.1 * a;
      }
      const double dx = s[0] - task.task_vector[0];
      const double dy = s[1] - task.task_vector[1];
      r.reward = -std::sqrt(dx * dx + dy * dy);
      break;
    }
    case TaskFamily::point_vel_1d: {
      s[1] = state[1] + 0.1 * clip_unit(action[0]);
      s[0] = state[0] + 0.05 * s[1];
      r.reward = -std::abs(s[1] - task.task_vector[0]);
      break;
    }
    case TaskFamily::point_drag_2d: {
      const double drag = task.task_vector[0];
      for (int i = 0; i < 2; ++i) {
        s[2 + i] = state[2 + i] + 0.1 * clip_unit(action[i]) - drag * 0.05 * state[2 + i];
        s[i] = state[i] + 0.05 * s[2 + i];
      }
      const double dx = s[0] - kDragGoal[0];
      const double dy = s[1] - kDragGoal[1];
      r.reward = -std::sqrt(dx * dx + dy * dy);
      break;
    }
  }
  return r;
}

double Trajectory::total_reward() const {
  double sum = 0.0;
  for (const auto& t : transitions) sum += t.reward;
  return sum;
}

Trajectory rollout(const TaskSpec& task, std::vector<double> initial_state,
                   const ActionFn& policy, int task_id, std::int64_t trajectory_id) {
  Trajectory traj;
  traj.task_id = task_id;
  traj.trajectory_id = trajectory_id;
  traj.transitions.reserve(static_cast<std::size_t>(task.horizon));
  std::vector<double> state = std::move(initial_state);
  for (int t = 0; t < task.horizon; ++t) {
    std::vector<double> action = policy(state);
    for (double& a : action) a = clip_unit(a);
    StepResult step = env_step(task, state, action);
    traj.transitions.push_back({state, std::move(action), step.reward, step.next_state});
    state = std::move(step.next_state);
  }
  return traj;
}

std::vector<double> oracle_context(const TaskSpec& task, std::size_t context_dim) {
  if (context_dim == 0 || context_dim < task.task_vector.size()) {
    throw ConfigError("oracle context dimension " + std::to_string(context_dim) +
                      " is smaller than the task vector");
  }
  std::vector<double> z(context_dim, 0.0);
  std::copy(task.task_vector.begin(), task.task_vector.end(), z.begin());
  return z;
}

std::string split_to_json(const TaskSplit& split) {
  using nlohmann::json;
  auto tasks = [](const std::vector<TaskSpec>& ts) {
    json arr = json::array();
    for (const auto& t : ts) {
      arr.push_back({{"family", std::string(to_string(t.family))},
                     {"task_vector", t.task_vector},
                     {"horizon", t.horizon},
                     {"discount", t.discount}});
    }
    return arr;
  };
  json j{{"seed", split.seed}, {"train", tasks(split.train_tasks)},
         {"test", tasks(split.test_tasks)}};
  return j.dump(2);
}

TaskSplit split_from_json(std::string_view text) {
  using nlohmann::json;
  TaskSplit split;
  try {
    const json j = json::parse(text);
    auto tasks = [](const json& arr) {
      std::vector<TaskSpec> out;
      for (const auto& t : arr) {
        TaskSpec spec{parse_family(t.at("family").get<std::string>()),
                      t.at("task_vector").get<std::vector<double>>(), t.at("horizon").get<int>(),
                      t.at("discount").get<double>()};
        spec.validate();
        out.push_back(std::move(spec));
      }
      return out;
    };
    split.seed = j.at("seed").get<std::uint64_t>();
    split.train_tasks = tasks(j.at("train"));
    split.test_tasks = tasks(j.at("test"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed task split: ") + e.what());
  }
  return split;
}

}  // namespace trajcl::env
