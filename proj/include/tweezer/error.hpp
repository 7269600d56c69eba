#pragma once

#include <stdexcept>
#include <string>

namespace tweezer {

/// Invalid user input: bad configuration values or violated preconditions.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (non-convergence, instability, infeasibility).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}
}  // namespace detail

}  // namespace tweezer
