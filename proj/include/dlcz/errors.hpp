#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dlcz {

/// Invalid configuration or out-of-contract parameters (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed, unsorted or insufficient data (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fit that did not converge; carries the last iterate (CLI exit code 4).
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, std::vector<double> last_iterate)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)) {}

  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

}  // namespace dlcz
