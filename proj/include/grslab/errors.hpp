#pragma once

#include <stdexcept>
#include <string>

namespace grs {

// Bad run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model construction failure (CLI exit code 3).
struct BuildError : std::runtime_error {
  explicit BuildError(const std::string& msg) : std::runtime_error(msg) {}
};

// Metric not invertible at an evaluation point.
struct SingularMetricError : std::runtime_error {
  explicit SingularMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace grs
