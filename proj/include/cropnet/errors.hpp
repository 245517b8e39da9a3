#pragma once

#include <stdexcept>
#include <string>

namespace cropnet {

/// Bad run configuration (missing keys, invariant violations). CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / IO failure (unreadable path, write failure). CLI exit code 3.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Data violates a documented contract (sentinel value, out-of-range pixel,
/// missing band, shape mismatch in fixtures). CLI exit code 4.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ExitCode : int {
  kSuccess = 0,
  kConfig = 2,
  kIo = 3,
  kData = 4,
};

}  // namespace cropnet
