#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <utility>
#include <vector>

#include "trajcl/env.hpp"
#include "trajcl/rng.hpp"

namespace trajcl::replay {

using env::Trajectory;
using env::Transition;

/// W contiguous transitions cropped from one stored trajectory.
struct TransitionWindow {
  std::vector<Transition> transitions;
  std::int64_t source_trajectory_id = 0;
  std::size_t start_index = 0;

  std::size_t size() const { return transitions.size(); }
};

inline constexpr std::size_t kDefaultCapacity = 1'000'000;

/// Trajectory store for one task. Holds at most `capacity` transitions;
/// whole trajectories are evicted oldest-first so no window can straddle
/// evicted data.
class TaskReplayBuffer {
 public:
  explicit TaskReplayBuffer(int task_id, std::size_t capacity = kDefaultCapacity);

  /// Throws UsageError when trajectory.task_id differs from this buffer's.
  void add_trajectory(Trajectory trajectory);

  TransitionWindow sample_window(std::size_t window_size, Rng& rng) const;
  /// Two windows from the same trajectory with independent uniform starts
  /// (starts may coincide).
  std::pair<TransitionWindow, TransitionWindow> sample_window_pair(std::size_t window_size,
                                                                   Rng& rng) const;
  /// Uniform with replacement over all stored transitions.
  std::vector<Transition> sample_rl_batch(std::size_t batch_size, Rng& rng) const;

  int task_id() const { return task_id_; }
  std::size_t capacity() const { return capacity_; }
  /// Stored transitions.
  std::size_t size() const { return size_; }
  bool empty() const { return trajectories_.empty(); }
  const std::deque<Trajectory>& trajectories() const { return trajectories_; }

  /// One JSON object per line per stored trajectory.
  void dump_jsonl(std::ostream& out) const;

 private:
  const Trajectory& pick_eligible(std::size_t window_size, Rng& rng) const;
  void rebuild_offsets();

  int task_id_;
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::deque<Trajectory> trajectories_;
  std::vector<std::size_t> offsets_;  // prefix sums of trajectory lengths
};

TransitionWindow crop_window(const Trajectory& trajectory, std::size_t start,
                             std::size_t window_size);

}  // namespace trajcl::replay
