#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trajcl::cli {

/// Exit codes: 0 success, 1 failed check or runtime error, 2 bad usage or
/// configuration.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point for `trajcl <train|eval|analyze|verify> ...`. args[0] is the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trajcl::cli
