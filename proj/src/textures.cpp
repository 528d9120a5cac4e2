// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/textures.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "cinemagen/errors.hpp"
#include "cinemagen/png_io.hpp"
#include "cinemagen/rng.hpp"

namespace cinemagen {

namespace {

constexpr int N = kTextureSize;

uint8_t clamp_u8(double v) {
  return static_cast<uint8_t>(std::min(255.0, std::max(0.0, std::round(v))));
}

// Value noise: random lattice, bilinear interpolation.
struct ValueNoise {
  std::vector<double> grid;
  int size;
  ValueNoise(Rng& rng, int size_) : grid(size_ * size_), size(size_) {
    for (auto& g : grid) g = rng.uniform();
  }
  double at(double x, double y) const {
    const int xi = static_cast<int>(std::floor(x)) % size;
    const int yi = static_cast<int>(std::floor(y)) % size;
    const double fx = x - std::floor(x), fy = y - std::floor(y);
    auto g = [&](int a, int b) { return grid[((b + size) % size) * size + ((a + size) % size)]; };
    const double top = g(xi, yi) * (1 - fx) + g(xi + 1, yi) * fx;
    const double bot = g(xi, yi + 1) * (1 - fx) + g(xi + 1, yi + 1) * fx;
    return top * (1 - fy) + bot * fy;
  }
};

double octave_noise(const std::vector<ValueNoise>& octaves, double x, double y) {
  double v = 0.0, amp = 1.0, freq = 1.0, norm = 0.0;
  for (const auto& o : octaves) {
    v += amp * o.at(x * freq / 32.0, y * freq / 32.0);
    norm += amp;
    amp *= 0.5;
    freq *= 2.0;
  }
  return v / norm;
}

ImageU8 noise_texture(Rng& rng, double r_base, double g_base, double b_base) {
  std::vector<ValueNoise> oct;
  for (int i = 0; i < 4; ++i) oct.emplace_back(rng, 16 << i);
  ImageU8 img(N, N, 3);
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      const double v = octave_noise(oct, x, y);
      img.at(y, x, 0) = clamp_u8(r_base * v * 255.0 + 20);
      img.at(y, x, 1) = clamp_u8(g_base * v * 255.0 + 20);
      img.at(y, x, 2) = clamp_u8(b_base * v * 255.0 + 20);
    }
  return img;
}

ImageU8 checker_texture(Rng& rng) {
  ImageU8 img(N, N, 3);
  const int cell = 8;
  std::vector<std::array<uint8_t, 3>> cell_colors;
  for (int i = 0; i < (N / cell) * (N / cell); ++i) {
    cell_colors.push_back({static_cast<uint8_t>(rng.uniform_int(0, 255)),
                           static_cast<uint8_t>(rng.uniform_int(0, 255)),
                           static_cast<uint8_t>(rng.uniform_int(0, 255))});
  }
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      const auto& c = cell_colors[(y / cell) * (N / cell) + (x / cell)];
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
    }
  return img;
}

ImageU8 shapes_texture(Rng& rng, bool circles) {
  ImageU8 img(N, N, 3);
  for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(30, 60));
  const int count = 350;
  for (int i = 0; i < count; ++i) {
    const int cx = static_cast<int>(rng.uniform_int(0, N - 1));
    const int cy = static_cast<int>(rng.uniform_int(0, N - 1));
    const int r = static_cast<int>(rng.uniform_int(3, 18));
    uint8_t col[3] = {static_cast<uint8_t>(rng.uniform_int(0, 255)),
                      static_cast<uint8_t>(rng.uniform_int(0, 255)),
                      static_cast<uint8_t>(rng.uniform_int(0, 255))};
    for (int y = std::max(0, cy - r); y <= std::min(N - 1, cy + r); ++y)
      for (int x = std::max(0, cx - r); x <= std::min(N - 1, cx + r); ++x) {
        if (circles) {
          const int dx = x - cx, dy = y - cy;
          if (dx * dx + dy * dy > r * r) continue;
        }
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = col[ch];
      }
  }
  return img;
}

ImageU8 stripes_texture(Rng& rng) {
  ImageU8 img(N, N, 3);
  std::array<std::array<uint8_t, 3>, 6> bands;
  for (auto& b : bands)
    b = {static_cast<uint8_t>(rng.uniform_int(0, 255)),
         static_cast<uint8_t>(rng.uniform_int(0, 255)),
         static_cast<uint8_t>(rng.uniform_int(0, 255))};
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      const auto& b = bands[((x + y) / 9) % bands.size()];
      const int jitter = static_cast<int>(rng.uniform_int(-14, 14));
      for (int ch = 0; ch < 3; ++ch)
        img.at(y, x, ch) = clamp_u8(b[ch] + jitter);
    }
  return img;
}

ImageU8 plasma_texture(double fr, double fg, double fb) {
  ImageU8 img(N, N, 3);
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      const double v = std::sin(x / 7.3) + std::sin(y / 11.1) +
                       std::sin((x + y) / 13.7) + std::sin(std::hypot(x - 128, y - 128) / 8.1);
      img.at(y, x, 0) = clamp_u8(128 + 100 * std::sin(v * fr));
      img.at(y, x, 1) = clamp_u8(128 + 100 * std::sin(v * fg + 1.7));
      img.at(y, x, 2) = clamp_u8(128 + 100 * std::sin(v * fb + 3.1));
    }
  return img;
}

ImageU8 voronoi_texture(Rng& rng) {
  ImageU8 img(N, N, 3);
  const int sites = 28;
  std::vector<std::array<int, 2>> pts(sites);
  std::vector<std::array<uint8_t, 3>> cols(sites);
  for (int i = 0; i < sites; ++i) {
    pts[i] = {static_cast<int>(rng.uniform_int(0, N - 1)),
              static_cast<int>(rng.uniform_int(0, N - 1))};
    cols[i] = {static_cast<uint8_t>(rng.uniform_int(0, 255)),
               static_cast<uint8_t>(rng.uniform_int(0, 255)),
               static_cast<uint8_t>(rng.uniform_int(0, 255))};
  }
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      int best = 0;
      int64_t best_d = INT64_MAX;
      for (int i = 0; i < sites; ++i) {
        const int64_t dx = x - pts[i][0], dy = y - pts[i][1];
        const int64_t d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      const double shade = 1.0 - std::min(1.0, std::sqrt(static_cast<double>(best_d)) / 80.0) * 0.5;
      for (int ch = 0; ch < 3; ++ch)
        img.at(y, x, ch) = clamp_u8(cols[best][ch] * shade);
    }
  return img;
}

ImageU8 bricks_texture(Rng& rng) {
  ImageU8 img(N, N, 3);
  const int bh = 16, bw = 32;
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      const int row = y / bh;
      const int xo = (row % 2) * (bw / 2);
      const bool mortar = (y % bh) == 0 || ((x + xo) % bw) == 0;
      const int base = mortar ? 70 : 150;
      const int jitter = static_cast<int>(rng.uniform_int(-18, 18));
      img.at(y, x, 0) = clamp_u8(base + jitter + (mortar ? 0 : 30));
      img.at(y, x, 1) = clamp_u8(base / 2 + jitter);
      img.at(y, x, 2) = clamp_u8(base / 3 + jitter);
    }
  return img;
}

ImageU8 marble_texture(Rng& rng) {
  std::vector<ValueNoise> oct;
  for (int i = 0; i < 4; ++i) oct.emplace_back(rng, 16 << i);
  ImageU8 img(N, N, 3);
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      const double n = octave_noise(oct, x, y);
      const double v = 0.5 + 0.5 * std::sin(x / 9.0 + 6.0 * n);
      img.at(y, x, 0) = clamp_u8(60 + 180 * v);
      img.at(y, x, 1) = clamp_u8(60 + 160 * v);
      img.at(y, x, 2) = clamp_u8(80 + 150 * v);
    }
  return img;
}

ImageU8 gradient_noise_texture(Rng& rng) {
  ImageU8 img(N, N, 3);
  for (int y = 0; y < N; ++y)
    for (int x = 0; x < N; ++x) {
      const int jitter = static_cast<int>(rng.uniform_int(-40, 40));
      img.at(y, x, 0) = clamp_u8(x + jitter);
      img.at(y, x, 1) = clamp_u8(255 - y + jitter);
      img.at(y, x, 2) = clamp_u8((x + y) / 2 + jitter);
    }
  return img;
}

}  // namespace

ImageU8 builtin_texture(int id) {
  if (id < 0 || id >= kTextureCount) {
    throw AssetError("texture id " + std::to_string(id) + " out of range 0.." +
                     std::to_string(kTextureCount - 1));
  }
  Rng rng = Rng::stream(0x7e97u, "texture-" + std::to_string(id));
  switch (id) {
    case 0: return noise_texture(rng, 0.9, 1.0, 1.2);
    case 1: return checker_texture(rng);
    case 2: return shapes_texture(rng, false);
    case 3: return shapes_texture(rng, true);
    case 4: return stripes_texture(rng);
    case 5: return plasma_texture(2.0, 3.0, 5.0);
    case 6: return voronoi_texture(rng);
    case 7: return gradient_noise_texture(rng);
    case 8: return bricks_texture(rng);
    default: return marble_texture(rng);
  }
}

std::string default_texture_dir() {
  if (const char* env = std::getenv("CINEMAGEN_TEXTURES")) return env;
#ifdef CINEMAGEN_DEFAULT_TEXTURE_DIR
  return CINEMAGEN_DEFAULT_TEXTURE_DIR;
#else
  return "assets/textures";
#endif
}

std::string texture_path(const std::string& dir, int id) {
  char name[32];
  std::snprintf(name, sizeof(name), "texture_%02d.png", id);
  return (std::filesystem::path(dir) / name).string();
}

std::vector<ImageU8> load_textures(const std::string& dir) {
  std::vector<ImageU8> out;
  for (int i = 0; i < kTextureCount; ++i) {
    const std::string path = texture_path(dir, i);
    if (!std::filesystem::exists(path)) {
      throw AssetError("missing texture asset '" + path + "'");
    }
    out.push_back(read_png(path));
  }
  return out;
}

}  // namespace cinemagen
