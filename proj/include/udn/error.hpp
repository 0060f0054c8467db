#pragma once

#include <stdexcept>
#include <string>

namespace udn {

/// Raised for malformed user input: bad shapes, out-of-range parameters,
/// invalid configuration files. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot produce a trustworthy result
/// (non-finite data, eigensolver non-convergence, singular systems).
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for file-system and parse failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace udn
