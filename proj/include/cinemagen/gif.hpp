// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "cinemagen/image.hpp"

namespace cinemagen {

struct GifOptions {
  int delay_cs = 10;   // per-frame delay in centiseconds
  int loop_count = 0;  // 0 = loop forever
};

// Animated GIF89a with a single global palette. When the frames hold at most
// 256 distinct colors the palette is exact; otherwise median-cut quantization
// reduces them to 256. Output bytes are a pure function of the inputs.
void write_gif(const std::string& path, const std::vector<ImageU8>& frames,
               const GifOptions& options = {});

// Exposed for tests: the palette build and index mapping used by write_gif.
struct GifPalette {
  std::vector<uint8_t> colors;  // rgb triples, size 3 * count
  int count = 0;
  int index_of(uint8_t r, uint8_t g, uint8_t b) const;  // nearest entry
};
GifPalette build_gif_palette(const std::vector<ImageU8>& frames);

}  // namespace cinemagen
