// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "cinemagen/errors.hpp"

namespace cinemagen {

namespace {

constexpr uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

uint32_t crc32_of(const uint8_t* data, size_t len) {
  return static_cast<uint32_t>(crc32(0L, data, static_cast<uInt>(len)));
}

void push_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t read_u32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void write_chunk(std::vector<uint8_t>& out, const char type[4],
                 const std::vector<uint8_t>& payload) {
  push_u32(out, static_cast<uint32_t>(payload.size()));
  std::vector<uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  out.insert(out.end(), body.begin(), body.end());
  push_u32(out, crc32_of(body.data(), body.size()));
}

std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> out(bound);
  if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                Z_BEST_COMPRESSION) != Z_OK) {
    throw IoError("png: deflate failed");
  }
  out.resize(bound);
  return out;
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& in,
                                  size_t expect) {
  std::vector<uint8_t> out(expect);
  uLongf len = static_cast<uLongf>(expect);
  if (uncompress(out.data(), &len, in.data(), static_cast<uLong>(in.size())) !=
          Z_OK ||
      len != expect) {
    throw IoError("png: inflate failed");
  }
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

void write_png(const std::string& path, const ImageU8& img) {
  if (img.c != 3) throw IoError("png: writer expects 3-channel images");
  std::vector<uint8_t> file(kSignature, kSignature + 8);

  std::vector<uint8_t> ihdr;
  push_u32(ihdr, static_cast<uint32_t>(img.w));
  push_u32(ihdr, static_cast<uint32_t>(img.h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  write_chunk(file, "IHDR", ihdr);

  // Filter type 0 on every scanline keeps the writer trivially deterministic.
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.h * (img.w * 3 + 1)));
  for (int64_t y = 0; y < img.h; ++y) {
    raw.push_back(0);
    const uint8_t* row = img.pixels.data() + y * img.w * 3;
    raw.insert(raw.end(), row, row + img.w * 3);
  }
  write_chunk(file, "IDAT", zlib_deflate(raw));
  write_chunk(file, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("png: cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(file.data()),
          static_cast<std::streamsize>(file.size()));
  if (!f) throw IoError("png: write failed for '" + path + "'");
}

ImageU8 read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("png: cannot open '" + path + "'");
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), kSignature, 8) != 0) {
    throw IoError("png: bad signature in '" + path + "'");
  }

  size_t pos = 8;
  int64_t w = 0, h = 0;
  int color_type = -1;
  std::vector<uint8_t> idat;
  while (pos + 8 <= buf.size()) {
    const uint32_t len = read_u32(buf.data() + pos);
    if (pos + 12 + len > buf.size()) throw IoError("png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
    const uint8_t* payload = buf.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      w = read_u32(payload);
      h = read_u32(payload + 4);
      const int depth = payload[8];
      color_type = payload[9];
      if (depth != 8) throw IoError("png: only 8-bit depth supported");
      if (payload[12] != 0) throw IoError("png: interlaced files unsupported");
      if (color_type != 0 && color_type != 2 && color_type != 6) {
        throw IoError("png: unsupported color type " +
                      std::to_string(color_type));
      }
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (w <= 0 || h <= 0 || idat.empty()) throw IoError("png: missing image data");

  const int64_t src_c = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
  const size_t stride = static_cast<size_t>(w * src_c);
  std::vector<uint8_t> raw = zlib_inflate(idat, static_cast<size_t>(h) * (stride + 1));

  // Undo per-scanline filters.
  std::vector<uint8_t> flat(static_cast<size_t>(h) * stride);
  const int64_t bpp = src_c;
  for (int64_t y = 0; y < h; ++y) {
    const uint8_t filter = raw[static_cast<size_t>(y) * (stride + 1)];
    const uint8_t* src = raw.data() + static_cast<size_t>(y) * (stride + 1) + 1;
    uint8_t* dst = flat.data() + static_cast<size_t>(y) * stride;
    const uint8_t* prev = y > 0 ? flat.data() + static_cast<size_t>(y - 1) * stride : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<size_t>(bpp) ? dst[i - bpp] : 0;
      const int b = prev ? prev[i] : 0;
      const int cc = (prev && i >= static_cast<size_t>(bpp)) ? prev[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, cc); break;
        default: throw IoError("png: unknown filter type");
      }
      dst[i] = static_cast<uint8_t>(v & 0xff);
    }
  }

  ImageU8 img(h, w, 3);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const uint8_t* px = flat.data() + (static_cast<size_t>(y) * w + x) * src_c;
      if (src_c == 1) {
        img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = px[0];
      } else {
        img.at(y, x, 0) = px[0];
        img.at(y, x, 1) = px[1];
        img.at(y, x, 2) = px[2];
      }
    }
  return img;
}

}  // namespace cinemagen
