#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace trajcl::nn {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(std::size_t n);
};

/// One bias-corrected Adam update in place. Throws NonFiniteError (leaving
/// params and state untouched) if any gradient entry is NaN/Inf, and
/// ConfigError on size mismatch or non-positive lr.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

}  // namespace trajcl::nn
