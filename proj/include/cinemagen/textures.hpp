// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "cinemagen/image.hpp"

namespace cinemagen {

inline constexpr int kTextureCount = 10;
inline constexpr int kTextureSize = 256;

// Deterministic procedural source of the bundled texture assets. The PNGs
// under assets/textures are generated from these (see tools/gen_textures).
ImageU8 builtin_texture(int id);

// Resolution order: explicit argument, CINEMAGEN_TEXTURES env var, compiled
// default (the source tree's assets/textures).
std::string default_texture_dir();
std::string texture_path(const std::string& dir, int id);

// Loads texture_00.png .. texture_09.png; throws AssetError naming the first
// missing file.
std::vector<ImageU8> load_textures(const std::string& dir);

}  // namespace cinemagen
