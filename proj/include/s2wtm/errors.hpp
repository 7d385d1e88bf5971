#pragma once

#include <stdexcept>
#include <string>

namespace s2wtm {

/// Invalid hyperparameters, malformed config files, unsupported option values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or malformed corpus files, artifacts, or inputs that violate a
/// data contract (shape mismatch, empty document, unequal sample counts).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure at runtime: rejection sampler overflow, non-finite loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace s2wtm
