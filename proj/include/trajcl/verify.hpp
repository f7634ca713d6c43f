#pragma once

// Self-check suite behind `trajcl verify`: closed-form loss values, the
// product-of-Gaussians identity, EMA decay and finite-difference gradient
// checks, each reported as one pass/fail row.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "trajcl/encoder.hpp"

namespace trajcl::verify {

using SimilarityFn = std::function<double(const encoder::PosteriorGaussian&,
                                          const encoder::PosteriorGaussian&)>;

/// Replaceable pieces, so a deliberately broken implementation can be fed
/// through the suite to confirm that it is caught.
struct Hooks {
  SimilarityFn similarity;  // empty: contrastive::similarity
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<CheckResult> run_suite(const Hooks& hooks = {});
bool all_passed(const std::vector<CheckResult>& results);
void print_table(const std::vector<CheckResult>& results, std::ostream& out);

}  // namespace trajcl::verify
