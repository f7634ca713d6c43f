#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace trajcl {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream, e.g.
/// derive_seed(seed, "collect", {iteration, task}). Pure function of its
/// arguments, so parallel workers can build their own streams.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                          std::initializer_list<std::uint64_t> indices = {});

inline Rng make_rng(std::uint64_t root, std::string_view stream,
                    std::initializer_list<std::uint64_t> indices = {}) {
  return Rng(derive_seed(root, stream, indices));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace trajcl
