#pragma once

#include <stdexcept>
#include <string>

namespace sgpucb {

/// Malformed argument: wrong dimension, non-finite value, out-of-range parameter.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operation requested on a kernel that cannot support it (e.g. an explicit
/// feature map for an infinite-dimensional RKHS).
struct UnsupportedKernelError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A requested feature dimension exceeds the configured budget.
struct CapacityError : std::length_error {
  using std::length_error::length_error;
};

/// A theoretical result was invoked outside its assumptions (e.g. lambda_min <= 0).
struct AssumptionViolation : std::domain_error {
  using std::domain_error::domain_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InstanceGenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad experiment configuration. `key` names the offending entry.
struct ConfigError : std::runtime_error {
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key(std::move(key)) {}
  std::string key;
};

struct AggregationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sgpucb
