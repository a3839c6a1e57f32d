#pragma once

#include <stdexcept>
#include <string>

namespace obree {

/// Invalid user configuration. The message names the offending key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure that cannot be represented as data in a result struct.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace obree
