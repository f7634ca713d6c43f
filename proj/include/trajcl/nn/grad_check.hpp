#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace trajcl::nn {

using ScalarFn = std::function<double(std::span<const double>)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::vector<std::size_t> probed;
};

/// Relative error used by every gradient check in the project:
/// |a - n| / max(|a|, |n|, floor). The floor keeps exact zeros from dividing
/// by zero; it is not a tolerance.
double relative_error(double analytic, double numeric, double floor = 1e-8);

/// Compares `analytic_grad` against central differences of `f` on
/// `probe_count` randomly chosen coordinates (all coordinates if probe_count
/// >= params.size()). `f` is evaluated on copies; `params` is not modified.
GradCheckReport grad_check(const ScalarFn& f, std::span<const double> params,
                           std::span<const double> analytic_grad, std::size_t probe_count,
                           double step, std::uint64_t seed, double floor = 1e-8);

/// Central-difference gradient of f at every coordinate.
std::vector<double> numeric_gradient(const ScalarFn& f, std::span<const double> params,
                                     double step);

}  // namespace trajcl::nn
