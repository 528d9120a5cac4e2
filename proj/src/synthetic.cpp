// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/synthetic.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cinemagen/errors.hpp"
#include "cinemagen/textures.hpp"

namespace cinemagen {

namespace {

constexpr char kDataMagic[8] = {'C', 'M', 'G', 'D', 'A', 'T', 'A', '1'};
constexpr uint32_t kDataVersion = 1;

struct Margins {
  double left = 0, right = 0, top = 0, bottom = 0;
};

Margins pattern_margins(PatternKind kind, const RectSpec& rect, int64_t step) {
  const double s = static_cast<double>(step);
  switch (kind) {
    case PatternKind::I:
      return {0, 0, 0, 13 * s};
    case PatternKind::O:
      return {0, 5 * s, 0, 5 * s};
    case PatternKind::L:
      return {0, 12 * s, 0, 13 * s};
    case PatternKind::Eight:
      return {2 * s, 2 * s, 3 * s, 3 * s};
    case PatternKind::Rotate: {
      const double r = std::hypot(static_cast<double>(rect.w),
                                  static_cast<double>(rect.h)) / 2.0;
      const double ex = std::max(0.0, r - static_cast<double>(rect.w) / 2.0);
      const double ey = std::max(0.0, r - static_cast<double>(rect.h) / 2.0);
      return {ex, ex, ey, ey};
    }
    case PatternKind::Scale: {
      const double ex = 0.25 * static_cast<double>(rect.w);
      const double ey = 0.25 * static_cast<double>(rect.h);
      return {ex, ex, ey, ey};
    }
  }
  throw ConfigError("unknown pattern kind");
}

void write_u32(std::ofstream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ofstream& f, uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
uint64_t read_u64(std::ifstream& f) {
  uint64_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_sample(std::ofstream& f, const SyntheticSample& s) {
  for (const auto& frame : s.frames)
    f.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
  for (const auto& mask : s.masks)
    f.write(reinterpret_cast<const char*>(mask.data()),
            static_cast<std::streamsize>(mask.size()));
}

}  // namespace

int64_t pattern_length(PatternKind kind) {
  switch (kind) {
    case PatternKind::I: return 27;
    case PatternKind::O: return 21;
    case PatternKind::L: return 26;
    case PatternKind::Eight: return 21;
    case PatternKind::Rotate: return 21;
    case PatternKind::Scale: return 17;
  }
  throw ConfigError("unknown pattern kind");
}

std::string pattern_name(PatternKind kind) {
  switch (kind) {
    case PatternKind::I: return "I";
    case PatternKind::O: return "O";
    case PatternKind::L: return "L";
    case PatternKind::Eight: return "eight";
    case PatternKind::Rotate: return "rotate";
    case PatternKind::Scale: return "scale";
  }
  throw ConfigError("unknown pattern kind");
}

PatternKind pattern_from_name(const std::string& name) {
  for (PatternKind k : all_patterns())
    if (pattern_name(k) == name) return k;
  throw ConfigError("unknown pattern '" + name +
                    "' (expected one of: I, O, L, eight, rotate, scale)");
}

const std::vector<PatternKind>& all_patterns() {
  static const std::vector<PatternKind> kinds = {
      PatternKind::I,      PatternKind::O,      PatternKind::L,
      PatternKind::Eight,  PatternKind::Rotate, PatternKind::Scale};
  return kinds;
}

int64_t trajectory_step(int64_t img_size) { return std::max<int64_t>(1, img_size / 32); }

std::vector<Pose> make_trajectory(PatternKind kind, int64_t img_size,
                                  const RectSpec& rect, int64_t x0,
                                  int64_t y0) {
  const double s = static_cast<double>(trajectory_step(img_size));
  const double cx = static_cast<double>(x0) + static_cast<double>(rect.w) / 2.0;
  const double cy = static_cast<double>(y0) + static_cast<double>(rect.h) / 2.0;
  const int64_t len = pattern_length(kind);
  std::vector<Pose> poses;
  poses.reserve(static_cast<size_t>(len));

  switch (kind) {
    case PatternKind::I:
      // 13 steps down, 13 steps back up.
      for (int64_t t = 0; t < len; ++t) {
        const double d = static_cast<double>(std::min(t, 26 - t));
        poses.push_back({cx, cy + s * d, 0.0, 1.0, 1.0});
      }
      break;
    case PatternKind::O:
      // Closed square loop: 5 right, 5 down, 5 left, 5 up.
      for (int64_t t = 0; t < len; ++t) {
        double dx = 0, dy = 0;
        if (t <= 5) {
          dx = static_cast<double>(t);
        } else if (t <= 10) {
          dx = 5;
          dy = static_cast<double>(t - 5);
        } else if (t <= 15) {
          dx = static_cast<double>(15 - t);
          dy = 5;
        } else {
          dy = static_cast<double>(20 - t);
        }
        poses.push_back({cx + s * dx, cy + s * dy, 0.0, 1.0, 1.0});
      }
      break;
    case PatternKind::L:
      // 13 steps down, then 12 steps right.
      for (int64_t t = 0; t < len; ++t) {
        const double dy = static_cast<double>(std::min<int64_t>(t, 13));
        const double dx = static_cast<double>(std::max<int64_t>(0, t - 13));
        poses.push_back({cx + s * dx, cy + s * dy, 0.0, 1.0, 1.0});
      }
      break;
    case PatternKind::Eight: {
      // Upper-right loop then lower-left loop, meeting at the start corner.
      static const int8_t ux[] = {1, 1, 0, 0, 0, -1, -1, 0, 0, 0};
      static const int8_t uy[] = {0, 0, -1, -1, -1, 0, 0, 1, 1, 1};
      static const int8_t lx[] = {-1, -1, 0, 0, 0, 1, 1, 0, 0, 0};
      static const int8_t ly[] = {0, 0, 1, 1, 1, 0, 0, -1, -1, -1};
      double dx = 0, dy = 0;
      poses.push_back({cx, cy, 0.0, 1.0, 1.0});
      for (int t = 0; t < 10; ++t) {
        dx += ux[t];
        dy += uy[t];
        poses.push_back({cx + s * dx, cy + s * dy, 0.0, 1.0, 1.0});
      }
      for (int t = 0; t < 10; ++t) {
        dx += lx[t];
        dy += ly[t];
        poses.push_back({cx + s * dx, cy + s * dy, 0.0, 1.0, 1.0});
      }
      break;
    }
    case PatternKind::Rotate:
      // One full revolution across the sequence; pose t has angle 2*pi*t/21.
      for (int64_t t = 0; t < len; ++t) {
        const double a =
            2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(len);
        poses.push_back({cx, cy, a, 1.0, 1.0});
      }
      break;
    case PatternKind::Scale:
      // Grow to 1.5x, shrink to 0.5x, return; one full cycle over 16 steps.
      for (int64_t t = 0; t < len; ++t) {
        const double f =
            1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 16.0);
        poses.push_back({cx, cy, 0.0, f, f});
      }
      break;
  }
  return poses;
}

bool pose_in_bounds(const Pose& pose, const RectSpec& rect, int64_t img_h,
                    int64_t img_w) {
  const double ex = pose.sx * static_cast<double>(rect.w) / 2.0;
  const double ey = pose.sy * static_cast<double>(rect.h) / 2.0;
  const double ca = std::abs(std::cos(pose.angle));
  const double sa = std::abs(std::sin(pose.angle));
  const double rx = ca * ex + sa * ey;
  const double ry = sa * ex + ca * ey;
  return pose.cx - rx >= 0.0 && pose.cx + rx <= static_cast<double>(img_w) &&
         pose.cy - ry >= 0.0 && pose.cy + ry <= static_cast<double>(img_h);
}

ImageU8 make_background(const ImageU8& texture, int64_t size, Rng& rng) {
  const double gain_r = rng.uniform(0.90, 1.10);
  const double gain_g = rng.uniform(0.90, 1.10);
  const double gain_b = rng.uniform(0.90, 1.10);
  const double gains[3] = {gain_r, gain_g, gain_b};
  ImageU8 out(size, size, 3);
  for (int64_t y = 0; y < size; ++y) {
    const int64_t sy = y * texture.h / size;
    for (int64_t x = 0; x < size; ++x) {
      const int64_t sx = x * texture.w / size;
      for (int64_t ch = 0; ch < 3; ++ch) {
        const double v =
            std::round(static_cast<double>(texture.at(sy, sx, ch)) * gains[ch]);
        out.at(y, x, ch) = static_cast<uint8_t>(std::min(255.0, std::max(0.0, v)));
      }
    }
  }
  return out;
}

SyntheticSample render_sample(const ImageU8& background, const RectSpec& rect,
                              const std::vector<Pose>& poses,
                              PatternKind kind) {
  SyntheticSample sample;
  sample.kind = kind;
  sample.h = background.h;
  sample.w = background.w;
  const int64_t stride = sample.mask_stride();
  for (const Pose& pose : poses) {
    ImageU8 frame = background;
    std::vector<uint8_t> mask(static_cast<size_t>(stride * sample.h), 0);
    const double ex = pose.sx * static_cast<double>(rect.w) / 2.0;
    const double ey = pose.sy * static_cast<double>(rect.h) / 2.0;
    const double ca = std::cos(pose.angle), sa = std::sin(pose.angle);
    for (int64_t y = 0; y < sample.h; ++y) {
      for (int64_t x = 0; x < sample.w; ++x) {
        const double u = static_cast<double>(x) + 0.5 - pose.cx;
        const double v = static_cast<double>(y) + 0.5 - pose.cy;
        const double ur = ca * u + sa * v;
        const double vr = -sa * u + ca * v;
        if (std::abs(ur) < ex && std::abs(vr) < ey) {
          for (int64_t ch = 0; ch < 3; ++ch)
            frame.at(y, x, ch) = rect.color[static_cast<size_t>(ch)];
          mask[static_cast<size_t>(y * stride + (x >> 3))] |=
              static_cast<uint8_t>(0x80u >> (x & 7));
        }
      }
    }
    sample.frames.push_back(std::move(frame));
    sample.masks.push_back(std::move(mask));
  }
  return sample;
}

SyntheticSample synth_sample(const std::vector<ImageU8>& textures,
                             PatternKind kind, int64_t size, uint64_t seed) {
  if (textures.empty()) throw AssetError("no textures supplied");
  Rng rng(seed);
  const int64_t texture_id =
      rng.uniform_int(0, static_cast<int64_t>(textures.size()) - 1);
  const ImageU8 background = make_background(textures[static_cast<size_t>(texture_id)], size, rng);
  RectSpec rect;
  rect.color = {static_cast<uint8_t>(rng.uniform_int(0, 255)),
                static_cast<uint8_t>(rng.uniform_int(0, 255)),
                static_cast<uint8_t>(rng.uniform_int(0, 255))};

  const int64_t step = trajectory_step(size);
  const int64_t lo_dim = std::max<int64_t>(1, size / 8);
  const int64_t hi_dim = std::max<int64_t>(2, size / 4);
  for (int attempt = 0; attempt < 128; ++attempt) {
    rect.w = rng.uniform_int(lo_dim, hi_dim);
    rect.h = rng.uniform_int(lo_dim, hi_dim);
    const Margins m = pattern_margins(kind, rect, step);
    const int64_t x_lo = static_cast<int64_t>(std::ceil(m.left));
    const int64_t x_hi = size - rect.w - static_cast<int64_t>(std::ceil(m.right));
    const int64_t y_lo = static_cast<int64_t>(std::ceil(m.top));
    const int64_t y_hi = size - rect.h - static_cast<int64_t>(std::ceil(m.bottom));
    if (x_lo > x_hi || y_lo > y_hi) continue;
    const int64_t x0 = rng.uniform_int(x_lo, x_hi);
    const int64_t y0 = rng.uniform_int(y_lo, y_hi);
    const auto poses = make_trajectory(kind, size, rect, x0, y0);
    bool ok = true;
    for (const Pose& p : poses)
      if (!pose_in_bounds(p, rect, size, size)) ok = false;
    if (!ok) continue;
    return render_sample(background, rect, poses, kind);
  }
  throw GenerationError("could not place pattern '" + pattern_name(kind) +
                        "' inside a " + std::to_string(size) + "x" +
                        std::to_string(size) + " image");
}

void pad_sequence(SyntheticSample& sample, int64_t target_len) {
  const int64_t len = static_cast<int64_t>(sample.frames.size());
  if (target_len < len) {
    throw DimensionError("pad_sequence: target " + std::to_string(target_len) +
                         " shorter than sequence " + std::to_string(len));
  }
  for (int64_t t = len; t < target_len; ++t) {
    sample.frames.emplace_back(sample.h, sample.w, 3);
    sample.masks.emplace_back(static_cast<size_t>(sample.mask_stride() * sample.h), 0);
  }
}

int64_t dataset_test_count(int64_t count) { return count / 20; }

DatasetManifest generate_dataset(const std::string& texture_dir,
                                 PatternKind kind, int64_t count, int64_t size,
                                 uint64_t seed, const std::string& out_dir) {
  const auto textures = load_textures(texture_dir);
  std::filesystem::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.kind = kind;
  manifest.count = count;
  manifest.size = size;
  manifest.seq_len = pattern_length(kind);
  manifest.seed = seed;
  manifest.test_count = dataset_test_count(count);
  manifest.train_count = count - manifest.test_count;

  const auto dir = std::filesystem::path(out_dir);
  auto open_split = [&](const char* name, int64_t n) {
    std::ofstream f(dir / name, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("dataset: cannot open '" + (dir / name).string() + "'");
    f.write(kDataMagic, sizeof(kDataMagic));
    write_u32(f, kDataVersion);
    write_u32(f, static_cast<uint32_t>(kind));
    write_u32(f, static_cast<uint32_t>(size));
    write_u32(f, static_cast<uint32_t>(size));
    write_u32(f, static_cast<uint32_t>(manifest.seq_len));
    write_u64(f, static_cast<uint64_t>(n));
    return f;
  };
  std::ofstream train = open_split("train.bin", manifest.train_count);
  std::ofstream test = open_split("test.bin", manifest.test_count);

  for (int64_t i = 0; i < count; ++i) {
    const SyntheticSample sample =
        synth_sample(textures, kind, size, seed ^ static_cast<uint64_t>(i));
    write_sample(i < manifest.train_count ? train : test, sample);
  }
  train.close();
  test.close();
  if (!train || !test) throw IoError("dataset: write failed in '" + out_dir + "'");

  std::ofstream mf(dir / "manifest.txt", std::ios::trunc);
  if (!mf) throw IoError("dataset: cannot write manifest in '" + out_dir + "'");
  mf << "format=cinemagen-dataset-v1\n";
  mf << "kind=" << pattern_name(kind) << "\n";
  mf << "count=" << manifest.count << "\n";
  mf << "size=" << manifest.size << "\n";
  mf << "seq_len=" << manifest.seq_len << "\n";
  mf << "seed=" << manifest.seed << "\n";
  mf << "train_count=" << manifest.train_count << "\n";
  mf << "test_count=" << manifest.test_count << "\n";
  mf << "train_file=train.bin\n";
  mf << "test_file=test.bin\n";
  return manifest;
}

DatasetManifest read_manifest(const std::string& dir) {
  const auto path = std::filesystem::path(dir) / "manifest.txt";
  std::ifstream f(path);
  if (!f) throw IoError("dataset: missing manifest '" + path.string() + "'");
  DatasetManifest m;
  std::string line;
  bool format_seen = false;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "format") {
      if (value != "cinemagen-dataset-v1") {
        throw IoError("dataset: unsupported format '" + value + "'");
      }
      format_seen = true;
    } else if (key == "kind") {
      m.kind = pattern_from_name(value);
    } else if (key == "count") {
      m.count = std::stoll(value);
    } else if (key == "size") {
      m.size = std::stoll(value);
    } else if (key == "seq_len") {
      m.seq_len = std::stoll(value);
    } else if (key == "seed") {
      m.seed = std::stoull(value);
    } else if (key == "train_count") {
      m.train_count = std::stoll(value);
    } else if (key == "test_count") {
      m.test_count = std::stoll(value);
    }
  }
  if (!format_seen) throw IoError("dataset: manifest missing format line");
  return m;
}

Dataset load_dataset(const std::string& dir, Split split) {
  Dataset ds;
  ds.manifest = read_manifest(dir);
  const char* name = split == Split::train ? "train.bin" : "test.bin";
  const auto path = std::filesystem::path(dir) / name;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("dataset: missing split file '" + path.string() + "'");

  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kDataMagic, sizeof(magic)) != 0) {
    throw IoError("dataset: bad magic in '" + path.string() + "'");
  }
  if (read_u32(f) != kDataVersion) throw IoError("dataset: unsupported version");
  const auto kind = static_cast<PatternKind>(read_u32(f));
  const int64_t h = read_u32(f);
  const int64_t w = read_u32(f);
  const int64_t seq_len = read_u32(f);
  const int64_t count = static_cast<int64_t>(read_u64(f));
  if (kind != ds.manifest.kind || h != ds.manifest.size ||
      seq_len != ds.manifest.seq_len) {
    throw IoError("dataset: split header disagrees with manifest");
  }
  const int64_t expected =
      split == Split::train ? ds.manifest.train_count : ds.manifest.test_count;
  if (count != expected) {
    throw IoError("dataset: sample count disagrees with manifest");
  }

  const int64_t stride = (w + 7) / 8;
  for (int64_t i = 0; i < count; ++i) {
    SyntheticSample s;
    s.kind = kind;
    s.h = h;
    s.w = w;
    for (int64_t t = 0; t < seq_len; ++t) {
      ImageU8 frame(h, w, 3);
      f.read(reinterpret_cast<char*>(frame.pixels.data()),
             static_cast<std::streamsize>(frame.pixels.size()));
      s.frames.push_back(std::move(frame));
    }
    for (int64_t t = 0; t < seq_len; ++t) {
      std::vector<uint8_t> mask(static_cast<size_t>(stride * h));
      f.read(reinterpret_cast<char*>(mask.data()),
             static_cast<std::streamsize>(mask.size()));
      s.masks.push_back(std::move(mask));
    }
    if (!f) throw IoError("dataset: truncated split file '" + path.string() + "'");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace cinemagen
