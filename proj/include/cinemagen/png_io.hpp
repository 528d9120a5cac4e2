// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "cinemagen/image.hpp"

namespace cinemagen {

// Minimal PNG support, enough for the bundled assets and frame dumps:
// 8-bit gray / RGB / RGBA, no interlacing. Output is always color type 2.
void write_png(const std::string& path, const ImageU8& img);
ImageU8 read_png(const std::string& path);

}  // namespace cinemagen
