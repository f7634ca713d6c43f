#include "trajcl/replay.hpp"

#include <algorithm>
#include <ostream>
#include <string>

#include <json.hpp>

#include "trajcl/errors.hpp"

namespace trajcl::replay {

TaskReplayBuffer::TaskReplayBuffer(int task_id, std::size_t capacity)
    : task_id_(task_id), capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void TaskReplayBuffer::add_trajectory(Trajectory trajectory) {
  if (trajectory.task_id != task_id_) {
    throw UsageError("trajectory of task " + std::to_string(trajectory.task_id) +
                     " added to buffer of task " + std::to_string(task_id_));
  }
  size_ += trajectory.size();
  trajectories_.push_back(std::move(trajectory));
  while (size_ > capacity_ && !trajectories_.empty()) {
    size_ -= trajectories_.front().size();
    trajectories_.pop_front();
  }
  rebuild_offsets();
}

void TaskReplayBuffer::rebuild_offsets() {
  offsets_.resize(trajectories_.size() + 1);
  offsets_[0] = 0;
  for (std::size_t i = 0; i < trajectories_.size(); ++i) {
    offsets_[i + 1] = offsets_[i] + trajectories_[i].size();
  }
}

TransitionWindow crop_window(const Trajectory& trajectory, std::size_t start,
                             std::size_t window_size) {
  if (window_size == 0 || start + window_size > trajectory.size()) {
    throw UsageError("window exceeds trajectory bounds");
  }
  TransitionWindow w;
  w.source_trajectory_id = trajectory.trajectory_id;
  w.start_index = start;
  const auto first = trajectory.transitions.begin() + static_cast<std::ptrdiff_t>(start);
  w.transitions.assign(first, first + static_cast<std::ptrdiff_t>(window_size));
  return w;
}

const Trajectory& TaskReplayBuffer::pick_eligible(std::size_t window_size, Rng& rng) const {
  if (window_size == 0) throw UsageError("window size must be >= 1");
  std::vector<std::size_t> eligible;
  eligible.reserve(trajectories_.size());
  for (std::size_t i = 0; i < trajectories_.size(); ++i) {
    if (trajectories_[i].size() >= window_size) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw EmptyBufferError("task " + std::to_string(task_id_) +
                           " buffer has no trajectory of length >= " +
                           std::to_string(window_size));
  }
  return trajectories_[eligible[uniform_index(rng, eligible.size())]];
}

TransitionWindow TaskReplayBuffer::sample_window(std::size_t window_size, Rng& rng) const {
  const Trajectory& traj = pick_eligible(window_size, rng);
  const std::size_t start = uniform_index(rng, traj.size() - window_size + 1);
  return crop_window(traj, start, window_size);
}

std::pair<TransitionWindow, TransitionWindow> TaskReplayBuffer::sample_window_pair(
    std::size_t window_size, Rng& rng) const {
  const Trajectory& traj = pick_eligible(window_size, rng);
  const std::size_t starts = traj.size() - window_size + 1;
  const std::size_t a = uniform_index(rng, starts);
  const std::size_t b = uniform_index(rng, starts);
  return {crop_window(traj, a, window_size), crop_window(traj, b, window_size)};
}

std::vector<Transition> TaskReplayBuffer::sample_rl_batch(std::size_t batch_size,
                                                          Rng& rng) const {
  std::vector<Transition> batch;
  if (batch_size == 0) return batch;
  if (size_ == 0) {
    throw EmptyBufferError("task " + std::to_string(task_id_) + " buffer is empty");
  }
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    const std::size_t flat = uniform_index(rng, size_);
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
    const std::size_t traj = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    batch.push_back(trajectories_[traj].transitions[flat - offsets_[traj]]);
  }
  return batch;
}

void TaskReplayBuffer::dump_jsonl(std::ostream& out) const {
  using nlohmann::json;
  for (const auto& traj : trajectories_) {
    json steps = json::array();
    for (const auto& t : traj.transitions) {
      steps.push_back({{"s", t.state}, {"a", t.action}, {"r", t.reward}, {"s2", t.next_state}});
    }
    out << json{{"task_id", traj.task_id},
                {"trajectory_id", traj.trajectory_id},
                {"transitions", steps}}
               .dump()
        << '\n';
  }
}

}  // namespace trajcl::replay
