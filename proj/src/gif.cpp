// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/gif.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_map>

#include "cinemagen/errors.hpp"

namespace cinemagen {

namespace {

struct WeightedColor {
  uint8_t rgb[3];
  uint64_t count;
};

// Median cut over the distinct-color histogram. Ordering is fully specified
// so the palette is deterministic.
std::vector<std::array<uint8_t, 3>> median_cut(std::vector<WeightedColor> colors,
                                               size_t target) {
  struct Box {
    size_t begin, end;  // range into `colors`
    uint64_t weight;
  };
  auto box_weight = [&](size_t b, size_t e) {
    uint64_t w = 0;
    for (size_t i = b; i < e; ++i) w += colors[i].count;
    return w;
  };
  std::vector<Box> boxes{{0, colors.size(), box_weight(0, colors.size())}};
  while (boxes.size() < target) {
    // Split the most populated box that still has more than one color.
    size_t pick = boxes.size();
    for (size_t i = 0; i < boxes.size(); ++i) {
      if (boxes[i].end - boxes[i].begin < 2) continue;
      if (pick == boxes.size() || boxes[i].weight > boxes[pick].weight) pick = i;
    }
    if (pick == boxes.size()) break;
    Box box = boxes[pick];

    int widest = 0;
    int range = -1;
    for (int ch = 0; ch < 3; ++ch) {
      uint8_t lo = 255, hi = 0;
      for (size_t i = box.begin; i < box.end; ++i) {
        lo = std::min(lo, colors[i].rgb[ch]);
        hi = std::max(hi, colors[i].rgb[ch]);
      }
      if (hi - lo > range) {
        range = hi - lo;
        widest = ch;
      }
    }
    std::sort(colors.begin() + static_cast<ptrdiff_t>(box.begin),
              colors.begin() + static_cast<ptrdiff_t>(box.end),
              [widest](const WeightedColor& a, const WeightedColor& b) {
                if (a.rgb[widest] != b.rgb[widest])
                  return a.rgb[widest] < b.rgb[widest];
                return std::memcmp(a.rgb, b.rgb, 3) < 0;
              });
    // Count-weighted median, kept strictly inside the range.
    uint64_t acc = 0;
    size_t cut = box.begin + 1;
    for (size_t i = box.begin; i + 1 < box.end; ++i) {
      acc += colors[i].count;
      if (acc * 2 >= box.weight) {
        cut = i + 1;
        break;
      }
    }
    const Box left{box.begin, cut, box_weight(box.begin, cut)};
    const Box right{cut, box.end, box_weight(cut, box.end)};
    boxes[pick] = left;
    boxes.push_back(right);
  }

  std::vector<std::array<uint8_t, 3>> palette;
  for (const Box& b : boxes) {
    uint64_t sum[3] = {0, 0, 0}, total = 0;
    for (size_t i = b.begin; i < b.end; ++i) {
      for (int ch = 0; ch < 3; ++ch)
        sum[ch] += static_cast<uint64_t>(colors[i].rgb[ch]) * colors[i].count;
      total += colors[i].count;
    }
    palette.push_back({static_cast<uint8_t>((sum[0] + total / 2) / total),
                       static_cast<uint8_t>((sum[1] + total / 2) / total),
                       static_cast<uint8_t>((sum[2] + total / 2) / total)});
  }
  std::sort(palette.begin(), palette.end());
  palette.erase(std::unique(palette.begin(), palette.end()), palette.end());
  return palette;
}

class BitWriter {
 public:
  void put(uint32_t code, int width) {
    acc_ |= code << nbits_;
    nbits_ += width;
    while (nbits_ >= 8) {
      bytes_.push_back(static_cast<uint8_t>(acc_ & 0xff));
      acc_ >>= 8;
      nbits_ -= 8;
    }
  }
  std::vector<uint8_t> finish() {
    if (nbits_ > 0) bytes_.push_back(static_cast<uint8_t>(acc_ & 0xff));
    acc_ = 0;
    nbits_ = 0;
    return std::move(bytes_);
  }

 private:
  std::vector<uint8_t> bytes_;
  uint32_t acc_ = 0;
  int nbits_ = 0;
};

// GIF-flavor LZW, matching the reference decoder's code-width schedule.
std::vector<uint8_t> lzw_encode(const std::vector<uint8_t>& indices,
                                int min_bits) {
  const int clear_code = 1 << min_bits;
  const int eof_code = clear_code + 1;
  int running_code = eof_code + 1;
  int running_bits = min_bits + 1;
  int max_code1 = 1 << running_bits;
  std::unordered_map<uint32_t, int> table;
  BitWriter bw;

  auto output = [&](int code) {
    bw.put(static_cast<uint32_t>(code), running_bits);
    if (running_code >= max_code1 && running_bits < 12) {
      ++running_bits;
      max_code1 = 1 << running_bits;
    }
  };

  output(clear_code);
  int cur = indices.empty() ? 0 : indices[0];
  for (size_t i = 1; i < indices.size(); ++i) {
    const int k = indices[i];
    const uint32_t key = (static_cast<uint32_t>(cur) << 8) | static_cast<uint32_t>(k);
    auto it = table.find(key);
    if (it != table.end()) {
      cur = it->second;
      continue;
    }
    output(cur);
    if (running_code >= 4095) {
      output(clear_code);
      table.clear();
      running_code = eof_code + 1;
      running_bits = min_bits + 1;
      max_code1 = 1 << running_bits;
    } else {
      table.emplace(key, running_code++);
    }
    cur = k;
  }
  output(cur);
  output(eof_code);
  return bw.finish();
}

void push_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

}  // namespace

int GifPalette::index_of(uint8_t r, uint8_t g, uint8_t b) const {
  int best = 0;
  int64_t best_d = -1;
  for (int i = 0; i < count; ++i) {
    const int64_t dr = static_cast<int64_t>(r) - colors[3 * i];
    const int64_t dg = static_cast<int64_t>(g) - colors[3 * i + 1];
    const int64_t db = static_cast<int64_t>(b) - colors[3 * i + 2];
    const int64_t d = dr * dr + dg * dg + db * db;
    if (best_d < 0 || d < best_d) {
      best_d = d;
      best = i;
      if (d == 0) break;
    }
  }
  return best;
}

GifPalette build_gif_palette(const std::vector<ImageU8>& frames) {
  std::map<uint32_t, uint64_t> hist;
  for (const auto& f : frames) {
    if (f.c != 3) throw IoError("gif: frames must be 3-channel");
    for (int64_t i = 0; i < f.h * f.w; ++i) {
      const uint32_t key = (static_cast<uint32_t>(f.pixels[3 * i]) << 16) |
                           (static_cast<uint32_t>(f.pixels[3 * i + 1]) << 8) |
                           static_cast<uint32_t>(f.pixels[3 * i + 2]);
      ++hist[key];
    }
  }

  std::vector<std::array<uint8_t, 3>> palette;
  if (hist.size() <= 256) {
    for (const auto& [key, n] : hist) {
      palette.push_back({static_cast<uint8_t>(key >> 16),
                         static_cast<uint8_t>(key >> 8),
                         static_cast<uint8_t>(key)});
    }
  } else {
    std::vector<WeightedColor> colors;
    colors.reserve(hist.size());
    for (const auto& [key, n] : hist) {
      colors.push_back({{static_cast<uint8_t>(key >> 16),
                         static_cast<uint8_t>(key >> 8),
                         static_cast<uint8_t>(key)},
                        n});
    }
    palette = median_cut(std::move(colors), 256);
  }

  GifPalette out;
  out.count = static_cast<int>(palette.size());
  for (const auto& c : palette)
    out.colors.insert(out.colors.end(), c.begin(), c.end());
  return out;
}

void write_gif(const std::string& path, const std::vector<ImageU8>& frames,
               const GifOptions& options) {
  if (frames.empty()) throw IoError("gif: no frames to encode");
  const int64_t h = frames[0].h, w = frames[0].w;
  for (const auto& f : frames) {
    if (f.h != h || f.w != w || f.c != 3) {
      throw IoError("gif: all frames must share one 3-channel geometry");
    }
  }

  const GifPalette palette = build_gif_palette(frames);
  int bits = 1;
  while ((1 << bits) < palette.count) ++bits;
  bits = std::max(bits, 1);
  const int table_size = 1 << bits;

  // Exact-match cache; falls back to nearest-entry search per distinct color.
  std::unordered_map<uint32_t, uint8_t> index_cache;
  auto map_index = [&](uint8_t r, uint8_t g, uint8_t b) {
    const uint32_t key = (static_cast<uint32_t>(r) << 16) |
                         (static_cast<uint32_t>(g) << 8) | b;
    auto it = index_cache.find(key);
    if (it != index_cache.end()) return it->second;
    const uint8_t idx = static_cast<uint8_t>(palette.index_of(r, g, b));
    index_cache.emplace(key, idx);
    return idx;
  };

  std::vector<uint8_t> out;
  out.insert(out.end(), {'G', 'I', 'F', '8', '9', 'a'});
  push_u16(out, static_cast<uint16_t>(w));
  push_u16(out, static_cast<uint16_t>(h));
  out.push_back(static_cast<uint8_t>(0xf0 | (bits - 1)));  // GCT, 8-bit colors
  out.push_back(0);  // background color index
  out.push_back(0);  // pixel aspect ratio
  for (int i = 0; i < table_size; ++i) {
    if (i < palette.count) {
      out.push_back(palette.colors[3 * i]);
      out.push_back(palette.colors[3 * i + 1]);
      out.push_back(palette.colors[3 * i + 2]);
    } else {
      out.insert(out.end(), {0, 0, 0});
    }
  }

  // NETSCAPE2.0 looping extension.
  out.insert(out.end(), {0x21, 0xff, 0x0b});
  const char* ns = "NETSCAPE2.0";
  out.insert(out.end(), ns, ns + 11);
  out.push_back(3);
  out.push_back(1);
  push_u16(out, static_cast<uint16_t>(options.loop_count));
  out.push_back(0);

  const int min_code_bits = std::max(bits, 2);
  for (const auto& f : frames) {
    // Graphic control: keep the frame in place until replaced.
    out.insert(out.end(), {0x21, 0xf9, 0x04, 0x04});
    push_u16(out, static_cast<uint16_t>(options.delay_cs));
    out.push_back(0);  // no transparency
    out.push_back(0);

    out.push_back(0x2c);
    push_u16(out, 0);
    push_u16(out, 0);
    push_u16(out, static_cast<uint16_t>(w));
    push_u16(out, static_cast<uint16_t>(h));
    out.push_back(0);  // no local color table

    std::vector<uint8_t> indices(static_cast<size_t>(h * w));
    for (int64_t i = 0; i < h * w; ++i) {
      indices[static_cast<size_t>(i)] =
          map_index(f.pixels[3 * i], f.pixels[3 * i + 1], f.pixels[3 * i + 2]);
    }
    out.push_back(static_cast<uint8_t>(min_code_bits));
    const std::vector<uint8_t> lzw = lzw_encode(indices, min_code_bits);
    for (size_t pos = 0; pos < lzw.size(); pos += 255) {
      const size_t len = std::min<size_t>(255, lzw.size() - pos);
      out.push_back(static_cast<uint8_t>(len));
      out.insert(out.end(), lzw.begin() + static_cast<ptrdiff_t>(pos),
                 lzw.begin() + static_cast<ptrdiff_t>(pos + len));
    }
    out.push_back(0);
  }
  out.push_back(0x3b);

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("gif: cannot open '" + path + "' for writing");
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("gif: write failed for '" + path + "'");
}

}  // namespace cinemagen
