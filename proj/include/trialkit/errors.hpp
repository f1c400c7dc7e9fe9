#pragma once

#include <stdexcept>
#include <string>

namespace trialkit {

// Invalid configuration or domain-type invariant violation (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: quadrature budget exhausted, non-PSD matrix,
// root not bracketed, degenerate statistic (CLI exit code 3).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace trialkit
