// SPDX-License-Identifier: Apache-2.0
// Regenerates the bundled texture assets from their procedural definitions.
// Usage: gen_textures [out_dir]

#include <cstdio>
#include <filesystem>

#include "cinemagen/png_io.hpp"
#include "cinemagen/textures.hpp"

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "assets/textures";
  std::filesystem::create_directories(out_dir);
  for (int i = 0; i < cinemagen::kTextureCount; ++i) {
    const std::string path = cinemagen::texture_path(out_dir, i);
    cinemagen::write_png(path, cinemagen::builtin_texture(i));
    std::printf("wrote %s\n", path.c_str());
  }
  return 0;
}
