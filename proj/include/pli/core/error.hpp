#pragma once

#include <stdexcept>
#include <string>

namespace pli {

/// Base error for all library failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a run configuration is invalid before any compute starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised when every importance weight underflows.
class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

}  // namespace pli
