// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cinemagen/errors.hpp"

namespace cinemagen {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

const std::string* find(const RunConfig& c, const std::string& key) {
  for (const auto& [k, v] : c.entries)
    if (k == key) return &v;
  return nullptr;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* type) {
  throw ConfigError("config key '" + key + "': value '" + value +
                    "' is not a valid " + type);
}

}  // namespace

bool RunConfig::has(const std::string& key) const {
  return find(*this, key) != nullptr;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries.emplace_back(key, value);
}

std::string RunConfig::get(const std::string& key,
                           const std::string& fallback) const {
  const std::string* v = find(*this, key);
  return v ? *v : fallback;
}

int64_t RunConfig::get_int(const std::string& key, int64_t fallback) const {
  const std::string* v = find(*this, key);
  if (!v) return fallback;
  char* end = nullptr;
  const long long parsed = std::strtoll(v->c_str(), &end, 10);
  if (v->empty() || end != v->c_str() + v->size()) bad_value(key, *v, "integer");
  return static_cast<int64_t>(parsed);
}

uint64_t RunConfig::get_u64(const std::string& key, uint64_t fallback) const {
  const std::string* v = find(*this, key);
  if (!v) return fallback;
  if (v->empty() || (*v)[0] == '-') bad_value(key, *v, "unsigned integer");
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(v->c_str(), &end, 10);
  if (end != v->c_str() + v->size()) bad_value(key, *v, "unsigned integer");
  return static_cast<uint64_t>(parsed);
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(*this, key);
  if (!v) return fallback;
  char* end = nullptr;
  const double parsed = std::strtod(v->c_str(), &end);
  if (v->empty() || end != v->c_str() + v->size()) bad_value(key, *v, "number");
  return parsed;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value, got '" + stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key");
    }
    if (config.has(key)) {
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": duplicate key '" + key + "'");
    }
    config.entries.emplace_back(key, value);
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : config.entries) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("config: cannot write '" + path + "'");
  f << config_to_text(config);
}

void check_known_keys(const RunConfig& config,
                      const std::vector<std::string>& known) {
  for (const auto& [k, v] : config.entries) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ConfigError("unknown config key '" + k + "'");
    }
  }
}

}  // namespace cinemagen
