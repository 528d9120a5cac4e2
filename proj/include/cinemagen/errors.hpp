// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cinemagen {

// Shape or axis mismatch in a tensor operation.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Misuse of the gradient tape (double backward, non-scalar loss, ...).
class TapeError : public std::runtime_error {
 public:
  explicit TapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File IO failure (missing file, short read, bad magic, ...).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing or unusable bundled asset.
class AssetError : public std::runtime_error {
 public:
  explicit AssetError(const std::string& msg) : std::runtime_error(msg) {}
};

// Sample synthesis could not satisfy its own constraints.
class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cinemagen
