// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cinemagen/errors.hpp"

namespace cinemagen {

// Packed HWC, 8 bits per channel.
struct ImageU8 {
  int64_t h = 0, w = 0, c = 0;
  std::vector<uint8_t> pixels;

  ImageU8() = default;
  ImageU8(int64_t h_, int64_t w_, int64_t c_)
      : h(h_), w(w_), c(c_), pixels(static_cast<size_t>(h_ * w_ * c_), 0) {}

  uint8_t& at(int64_t y, int64_t x, int64_t ch) {
    return pixels[static_cast<size_t>((y * w + x) * c + ch)];
  }
  uint8_t at(int64_t y, int64_t x, int64_t ch) const {
    return pixels[static_cast<size_t>((y * w + x) * c + ch)];
  }
};

// Packed HWC, double precision, values conventionally in [0, 1].
struct ImageD {
  int64_t h = 0, w = 0, c = 0;
  std::vector<double> pixels;

  ImageD() = default;
  ImageD(int64_t h_, int64_t w_, int64_t c_)
      : h(h_), w(w_), c(c_), pixels(static_cast<size_t>(h_ * w_ * c_), 0.0) {}

  double& at(int64_t y, int64_t x, int64_t ch) {
    return pixels[static_cast<size_t>((y * w + x) * c + ch)];
  }
  double at(int64_t y, int64_t x, int64_t ch) const {
    return pixels[static_cast<size_t>((y * w + x) * c + ch)];
  }
};

inline ImageD to_unit(const ImageU8& img) {
  ImageD out(img.h, img.w, img.c);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = static_cast<double>(img.pixels[i]) / 255.0;
  return out;
}

inline ImageU8 from_unit(const ImageD& img) {
  ImageU8 out(img.h, img.w, img.c);
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = std::round(img.pixels[i] * 255.0);
    out.pixels[i] = static_cast<uint8_t>(std::min(255.0, std::max(0.0, v)));
  }
  return out;
}

}  // namespace cinemagen
