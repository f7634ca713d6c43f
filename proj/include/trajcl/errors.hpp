#pragma once

#include <stdexcept>
#include <string>

namespace trajcl {

/// Invalid configuration: bad dimensions, out-of-range hyper-parameters,
/// unknown enum names.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was called in a state where its precondition does not hold.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// No stored data satisfies a sampling request.
class EmptyBufferError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or gradient became NaN/Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace trajcl
