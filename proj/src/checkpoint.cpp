// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "cinemagen/errors.hpp"

namespace cinemagen {

namespace {

constexpr char kMagic[8] = {'C', 'M', 'G', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void append_pod(std::vector<uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T read_pod(const std::vector<uint8_t>& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("checkpoint: truncated file");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

size_t dtype_size(CheckpointDtype d) {
  switch (d) {
    case CheckpointDtype::f32: return 4;
    case CheckpointDtype::f64: return 8;
    case CheckpointDtype::u64: return 8;
  }
  throw IoError("checkpoint: unknown dtype tag");
}

}  // namespace

void Checkpoint::put_f32(const std::string& name, std::vector<int64_t> shape,
                         const float* data, size_t count) {
  CheckpointEntry e{CheckpointDtype::f32, std::move(shape), {}};
  e.bytes.resize(count * 4);
  std::memcpy(e.bytes.data(), data, e.bytes.size());
  entries_[name] = std::move(e);
}

void Checkpoint::put_f64(const std::string& name, std::vector<int64_t> shape,
                         const double* data, size_t count) {
  CheckpointEntry e{CheckpointDtype::f64, std::move(shape), {}};
  e.bytes.resize(count * 8);
  std::memcpy(e.bytes.data(), data, e.bytes.size());
  entries_[name] = std::move(e);
}

void Checkpoint::put_u64(const std::string& name, std::vector<int64_t> shape,
                         const uint64_t* data, size_t count) {
  CheckpointEntry e{CheckpointDtype::u64, std::move(shape), {}};
  e.bytes.resize(count * 8);
  std::memcpy(e.bytes.data(), data, e.bytes.size());
  entries_[name] = std::move(e);
}

bool Checkpoint::has(const std::string& name) const {
  return entries_.contains(name);
}

const CheckpointEntry& Checkpoint::fetch(const std::string& name,
                                         CheckpointDtype dtype) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw IoError("checkpoint: missing entry '" + name + "'");
  }
  if (it->second.dtype != dtype) {
    throw IoError("checkpoint: dtype mismatch for entry '" + name + "'");
  }
  return it->second;
}

std::vector<float> Checkpoint::get_f32(const std::string& name) const {
  const auto& e = fetch(name, CheckpointDtype::f32);
  std::vector<float> out(e.bytes.size() / 4);
  std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
  return out;
}

std::vector<double> Checkpoint::get_f64(const std::string& name) const {
  const auto& e = fetch(name, CheckpointDtype::f64);
  std::vector<double> out(e.bytes.size() / 8);
  std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
  return out;
}

std::vector<uint64_t> Checkpoint::get_u64(const std::string& name) const {
  const auto& e = fetch(name, CheckpointDtype::u64);
  std::vector<uint64_t> out(e.bytes.size() / 8);
  std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
  return out;
}

const std::vector<int64_t>& Checkpoint::shape(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw IoError("checkpoint: missing entry '" + name + "'");
  }
  return it->second.shape;
}

void Checkpoint::save(const std::string& path) const {
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + sizeof(kMagic));
  append_pod(buf, kVersion);
  append_pod(buf, static_cast<uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {
    append_pod(buf, static_cast<uint32_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    append_pod(buf, static_cast<uint8_t>(e.dtype));
    append_pod(buf, static_cast<uint32_t>(e.shape.size()));
    for (int64_t d : e.shape) append_pod(buf, d);
    append_pod(buf, static_cast<uint64_t>(e.bytes.size()));
    buf.insert(buf.end(), e.bytes.begin(), e.bytes.end());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!f) throw IoError("checkpoint: write failed for '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open '" + path + "'");
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  size_t pos = 0;
  if (buf.size() < sizeof(kMagic) ||
      std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint: bad magic in '" + path + "'");
  }
  pos += sizeof(kMagic);
  const uint32_t version = read_pod<uint32_t>(buf, pos);
  if (version != kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  const uint32_t count = read_pod<uint32_t>(buf, pos);
  Checkpoint ckpt;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = read_pod<uint32_t>(buf, pos);
    if (pos + name_len > buf.size()) throw IoError("checkpoint: truncated file");
    std::string name(reinterpret_cast<const char*>(buf.data() + pos), name_len);
    pos += name_len;
    CheckpointEntry e;
    const uint8_t tag = read_pod<uint8_t>(buf, pos);
    if (tag > 2) throw IoError("checkpoint: unknown dtype tag");
    e.dtype = static_cast<CheckpointDtype>(tag);
    const uint32_t ndim = read_pod<uint32_t>(buf, pos);
    e.shape.resize(ndim);
    for (uint32_t d = 0; d < ndim; ++d) e.shape[d] = read_pod<int64_t>(buf, pos);
    const uint64_t nbytes = read_pod<uint64_t>(buf, pos);
    if (pos + nbytes > buf.size()) throw IoError("checkpoint: truncated file");
    if (nbytes % dtype_size(e.dtype) != 0) {
      throw IoError("checkpoint: payload size not a dtype multiple");
    }
    e.bytes.assign(buf.begin() + static_cast<ptrdiff_t>(pos),
                   buf.begin() + static_cast<ptrdiff_t>(pos + nbytes));
    pos += nbytes;
    ckpt.entries_[name] = std::move(e);
  }
  return ckpt;
}

}  // namespace cinemagen
