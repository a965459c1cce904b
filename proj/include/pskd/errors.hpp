#pragma once

#include <stdexcept>
#include <string>

namespace pskd {

/// Invalid configuration, shape mismatch, or out-of-domain parameter.
/// The CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical-validity failure (non-hermitian input, probabilities that do not
/// sum to one, trace not preserved). The CLI maps this to exit code 2.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pskd
