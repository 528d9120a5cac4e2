// SPDX-License-Identifier: Apache-2.0
#pragma once

// Named-blob checkpoint container with a stable binary layout. Entries are
// written sorted by name so that save() is byte-deterministic for equal
// contents.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cinemagen {

enum class CheckpointDtype : uint8_t { f32 = 0, f64 = 1, u64 = 2 };

struct CheckpointEntry {
  CheckpointDtype dtype;
  std::vector<int64_t> shape;
  std::vector<uint8_t> bytes;
};

class Checkpoint {
 public:
  void put_f32(const std::string& name, std::vector<int64_t> shape,
               const float* data, size_t count);
  void put_f64(const std::string& name, std::vector<int64_t> shape,
               const double* data, size_t count);
  void put_u64(const std::string& name, std::vector<int64_t> shape,
               const uint64_t* data, size_t count);

  bool has(const std::string& name) const;
  // Getters throw IoError when the entry is missing or has the wrong dtype.
  std::vector<float> get_f32(const std::string& name) const;
  std::vector<double> get_f64(const std::string& name) const;
  std::vector<uint64_t> get_u64(const std::string& name) const;
  const std::vector<int64_t>& shape(const std::string& name) const;

  const std::map<std::string, CheckpointEntry>& entries() const {
    return entries_;
  }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

 private:
  const CheckpointEntry& fetch(const std::string& name,
                               CheckpointDtype dtype) const;
  std::map<std::string, CheckpointEntry> entries_;
};

}  // namespace cinemagen
