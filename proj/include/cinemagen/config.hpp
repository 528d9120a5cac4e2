// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat key=value run configuration: loaded from a file, overridden by CLI
// flags, and written back verbatim into every output directory so a run can
// be reproduced from its snapshot.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cinemagen {

struct RunConfig {
  // Insertion-ordered; keys are unique (set() overwrites in place).
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  // Getters return the fallback when the key is absent and throw ConfigError
  // when the stored value does not parse as the requested type.
  std::string get(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
};

// Syntax: one `key = value` per line; blank lines and full-line `#` comments
// allowed; duplicate keys rejected (ConfigError with the line number).
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);  // IoError if unreadable

std::string config_to_text(const RunConfig& config);
void save_config(const RunConfig& config, const std::string& path);

// Rejects any key outside `known` (ConfigError naming the offender).
void check_known_keys(const RunConfig& config,
                      const std::vector<std::string>& known);

}  // namespace cinemagen
