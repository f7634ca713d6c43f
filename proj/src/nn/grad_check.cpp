#include "trajcl/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trajcl/errors.hpp"
#include "trajcl/rng.hpp"

namespace trajcl::nn {
namespace {

double central_difference(const ScalarFn& f, std::vector<double>& x, std::size_t i,
                          double step) {
  const double saved = x[i];
  x[i] = saved + step;
  const double up = f(x);
  x[i] = saved - step;
  const double down = f(x);
  x[i] = saved;
  return (up - down) / (2.0 * step);
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ScalarFn& f, std::span<const double> params,
                           std::span<const double> analytic_grad, std::size_t probe_count,
                           double step, std::uint64_t seed, double floor) {
  if (params.size() != analytic_grad.size()) {
    throw ConfigError("grad_check: gradient size does not match parameters");
  }
  if (!(step > 0.0)) throw ConfigError("grad_check: step must be positive");

  std::vector<std::size_t> idx(params.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (probe_count < idx.size()) {
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(probe_count);
    std::sort(idx.begin(), idx.end());
  }

  std::vector<double> x(params.begin(), params.end());
  GradCheckReport report;
  report.probed = idx;
  for (const std::size_t i : idx) {
    const double numeric = central_difference(f, x, i, step);
    const double err = relative_error(analytic_grad[i], numeric, floor);
    if (err >= report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_index = i;
      report.worst_analytic = analytic_grad[i];
      report.worst_numeric = numeric;
    }
  }
  return report;
}

std::vector<double> numeric_gradient(const ScalarFn& f, std::span<const double> params,
                                     double step) {
  std::vector<double> x(params.begin(), params.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = central_difference(f, x, i, step);
  return g;
}

}  // namespace trajcl::nn
