// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "cinemagen/errors.hpp"
#include "cinemagen/synthetic.hpp"
#include "cinemagen/textures.hpp"

using namespace cinemagen;

namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const char* leaf) {
  const fs::path p = fs::temp_directory_path() / "cinemagen_synth_tests" / leaf;
  fs::create_directories(p);
  return p;
}

std::vector<uint8_t> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int64_t mask_area(const SyntheticSample& s, size_t t) {
  int64_t n = 0;
  for (int64_t y = 0; y < s.h; ++y)
    for (int64_t x = 0; x < s.w; ++x)
      if (s.mask_at(t, y, x)) ++n;
  return n;
}

bool same_pos(const Pose& a, const Pose& b) {
  return a.cx == b.cx && a.cy == b.cy;
}

}  // namespace

TEST_CASE("pattern lengths and names") {
  CHECK(pattern_length(PatternKind::I) == 27);
  CHECK(pattern_length(PatternKind::O) == 21);
  CHECK(pattern_length(PatternKind::L) == 26);
  CHECK(pattern_length(PatternKind::Eight) == 21);
  CHECK(pattern_length(PatternKind::Rotate) == 21);
  CHECK(pattern_length(PatternKind::Scale) == 17);

  for (PatternKind k : all_patterns())
    CHECK(pattern_from_name(pattern_name(k)) == k);
  CHECK_THROWS_AS(pattern_from_name("zigzag"), ConfigError);
}

TEST_CASE("trajectory step scales with image size") {
  CHECK(trajectory_step(32) == 1);
  CHECK(trajectory_step(64) == 2);
  CHECK(trajectory_step(16) == 1);  // floor of 1
  CHECK(trajectory_step(128) == 4);
}

TEST_CASE("I pattern sweeps down and returns") {
  const RectSpec rect{6, 4, {10, 20, 30}};
  const auto poses = make_trajectory(PatternKind::I, 32, rect, 10, 2);
  REQUIRE(poses.size() == 27);
  const double cx = 10 + 3.0, cy = 2 + 2.0;
  CHECK(poses[0].cx == cx);
  CHECK(poses[0].cy == cy);
  CHECK(poses[13].cy == cy + 13.0);  // turning point
  CHECK(same_pos(poses[26], poses[0]));
  for (size_t t = 0; t < poses.size(); ++t) {
    CHECK(poses[t].cx == cx);  // pure vertical motion
    CHECK(poses[t].angle == 0.0);
  }
  for (size_t t = 1; t <= 13; ++t) CHECK(poses[t].cy > poses[t - 1].cy);
  for (size_t t = 14; t < 27; ++t) CHECK(poses[t].cy < poses[t - 1].cy);
}

TEST_CASE("O pattern is a closed square loop") {
  const RectSpec rect{4, 4, {0, 0, 0}};
  const auto poses = make_trajectory(PatternKind::O, 32, rect, 3, 3);
  REQUIRE(poses.size() == 21);
  const double cx = 5.0, cy = 5.0;
  CHECK(same_pos(poses[20], poses[0]));  // closes
  // Corners of the square.
  CHECK(poses[5].cx == cx + 5);
  CHECK(poses[5].cy == cy);
  CHECK(poses[10].cx == cx + 5);
  CHECK(poses[10].cy == cy + 5);
  CHECK(poses[15].cx == cx);
  CHECK(poses[15].cy == cy + 5);
  // Unit steps throughout.
  for (size_t t = 1; t < poses.size(); ++t) {
    const double d = std::abs(poses[t].cx - poses[t - 1].cx) +
                     std::abs(poses[t].cy - poses[t - 1].cy);
    CHECK(d == 1.0);
  }
}

TEST_CASE("L pattern goes down then right") {
  const RectSpec rect{4, 4, {0, 0, 0}};
  const auto poses = make_trajectory(PatternKind::L, 64, rect, 6, 6);
  REQUIRE(poses.size() == 26);
  const double s = 2.0;  // step at size 64
  const double cx = 8.0, cy = 8.0;
  CHECK(poses[13].cx == cx);
  CHECK(poses[13].cy == cy + 13 * s);  // bottom of the vertical stroke
  CHECK(poses[25].cx == cx + 12 * s);
  CHECK(poses[25].cy == cy + 13 * s);
  for (size_t t = 1; t <= 13; ++t) CHECK(poses[t].cx == cx);
  for (size_t t = 14; t < 26; ++t) CHECK(poses[t].cy == cy + 13 * s);
}

TEST_CASE("eight pattern closes both loops at the start") {
  const RectSpec rect{4, 4, {0, 0, 0}};
  const auto poses = make_trajectory(PatternKind::Eight, 32, rect, 12, 12);
  REQUIRE(poses.size() == 21);
  CHECK(same_pos(poses[10], poses[0]));  // upper loop closes
  CHECK(same_pos(poses[20], poses[0]));  // lower loop closes
  // Upper loop stays up-right of start, lower loop down-left.
  for (size_t t = 1; t < 10; ++t) {
    CHECK(poses[t].cx >= poses[0].cx);
    CHECK(poses[t].cy <= poses[0].cy);
  }
  for (size_t t = 11; t < 20; ++t) {
    CHECK(poses[t].cx <= poses[0].cx);
    CHECK(poses[t].cy >= poses[0].cy);
  }
}

TEST_CASE("rotate pattern spins one revolution in place") {
  const RectSpec rect{8, 4, {0, 0, 0}};
  const auto poses = make_trajectory(PatternKind::Rotate, 32, rect, 12, 14);
  REQUIRE(poses.size() == 21);
  for (size_t t = 0; t < poses.size(); ++t) {
    CHECK(poses[t].cx == poses[0].cx);
    CHECK(poses[t].cy == poses[0].cy);
    CHECK(poses[t].angle ==
          doctest::Approx(2.0 * std::numbers::pi * double(t) / 21.0).epsilon(1e-12));
  }
  CHECK(poses[20].angle ==
        doctest::Approx(2.0 * std::numbers::pi * 20.0 / 21.0).epsilon(1e-12));
}

TEST_CASE("scale pattern breathes through a sine cycle") {
  const RectSpec rect{8, 8, {0, 0, 0}};
  const auto poses = make_trajectory(PatternKind::Scale, 32, rect, 12, 12);
  REQUIRE(poses.size() == 17);
  CHECK(poses[0].sx == 1.0);
  CHECK(poses[4].sx == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(poses[12].sx == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(poses[16].sx == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& p : poses) {
    CHECK(p.sx == p.sy);  // isotropic
    CHECK(same_pos(p, poses[0]));
  }
}

TEST_CASE("pose_in_bounds respects rotation-expanded extents") {
  const RectSpec rect{10, 10, {0, 0, 0}};
  const Pose centered{16, 16, 0.0, 1.0, 1.0};
  CHECK(pose_in_bounds(centered, rect, 32, 32));

  // Axis-aligned at x=7 the half width 5 just fits; rotated 45 degrees the
  // bounding radius grows to ~7.07 and pokes out the left edge.
  const Pose near_edge{7, 16, 0.0, 1.0, 1.0};
  CHECK(pose_in_bounds(near_edge, rect, 32, 32));
  const Pose rotated{7, 16, std::numbers::pi / 4.0, 1.0, 1.0};
  CHECK_FALSE(pose_in_bounds(rotated, rect, 32, 32));

  // Scaling grows the extents the same way.
  const Pose scaled{7, 16, 0.0, 1.5, 1.0};
  CHECK_FALSE(pose_in_bounds(scaled, rect, 32, 32));
}

TEST_CASE("make_background resizes nearest-neighbor with channel gains") {
  ImageU8 tex(2, 2, 3);
  // Four distinct corner colors.
  const uint8_t colors[4][3] = {{200, 40, 90}, {30, 180, 60}, {120, 120, 200}, {90, 200, 30}};
  for (int64_t y = 0; y < 2; ++y)
    for (int64_t x = 0; x < 2; ++x)
      for (int64_t c = 0; c < 3; ++c)
        tex.at(y, x, c) = colors[y * 2 + x][c];

  Rng rng(77);
  const ImageU8 bg = make_background(tex, 6, rng);
  REQUIRE(bg.h == 6);
  REQUIRE(bg.w == 6);
  // Each 3x3 quadrant maps to one texture pixel, so it is constant.
  for (int64_t qy = 0; qy < 2; ++qy)
    for (int64_t qx = 0; qx < 2; ++qx)
      for (int64_t y = 0; y < 3; ++y)
        for (int64_t x = 0; x < 3; ++x)
          for (int64_t c = 0; c < 3; ++c)
            CHECK(bg.at(qy * 3 + y, qx * 3 + x, c) == bg.at(qy * 3, qx * 3, c));
  // Gains stay within +-10%.
  for (int64_t y = 0; y < 6; ++y)
    for (int64_t x = 0; x < 6; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        const double src = tex.at(y / 3, x / 3, c);
        const double out = bg.at(y, x, c);
        CHECK(out >= std::floor(src * 0.90) - 1);
        CHECK(out <= std::ceil(src * 1.10) + 1);
      }

  // Same rng state reproduces the same background.
  Rng rng2(77);
  const ImageU8 bg2 = make_background(tex, 6, rng2);
  CHECK(bg2.pixels == bg.pixels);
}

TEST_CASE("render_sample paints the rectangle exactly where the mask says") {
  ImageU8 bg(32, 32, 3);
  for (size_t i = 0; i < bg.pixels.size(); ++i)
    bg.pixels[i] = static_cast<uint8_t>((i * 31) & 0xff);
  const RectSpec rect{6, 4, {255, 0, 0}};
  const auto poses = make_trajectory(PatternKind::I, 32, rect, 10, 2);
  const auto sample = render_sample(bg, rect, poses, PatternKind::I);

  REQUIRE(sample.frames.size() == 27);
  REQUIRE(sample.masks.size() == 27);
  for (size_t t = 0; t < sample.frames.size(); ++t) {
    for (int64_t y = 0; y < 32; ++y)
      for (int64_t x = 0; x < 32; ++x) {
        if (sample.mask_at(t, y, x)) {
          CHECK(sample.frames[t].at(y, x, 0) == 255);
          CHECK(sample.frames[t].at(y, x, 1) == 0);
          CHECK(sample.frames[t].at(y, x, 2) == 0);
        } else {
          for (int64_t c = 0; c < 3; ++c)
            CHECK(sample.frames[t].at(y, x, c) == bg.at(y, x, c));
        }
      }
    // Axis-aligned integer rectangle covers exactly w*h pixels.
    CHECK(mask_area(sample, t) == rect.w * rect.h);
  }
}

TEST_CASE("scale pattern mask area follows the breathing cycle") {
  ImageU8 bg(32, 32, 3);
  const RectSpec rect{12, 12, {200, 200, 0}};
  const auto poses = make_trajectory(PatternKind::Scale, 32, rect, 10, 10);
  const auto sample = render_sample(bg, rect, poses, PatternKind::Scale);
  std::vector<int64_t> areas;
  for (size_t t = 0; t < sample.frames.size(); ++t)
    areas.push_back(mask_area(sample, t));
  for (size_t t = 1; t <= 4; ++t) CHECK(areas[t] >= areas[t - 1]);
  for (size_t t = 5; t <= 12; ++t) CHECK(areas[t] <= areas[t - 1]);
  for (size_t t = 13; t <= 16; ++t) CHECK(areas[t] >= areas[t - 1]);
  for (size_t t = 0; t < areas.size(); ++t) {
    CHECK(areas[4] >= areas[t]);
    CHECK(areas[12] <= areas[t]);
  }
}

TEST_CASE("builtin textures are deterministic and the bundled files match") {
  const ImageU8 a = builtin_texture(5);
  const ImageU8 b = builtin_texture(5);
  CHECK(a.pixels == b.pixels);
  CHECK(a.h == kTextureSize);
  CHECK(a.w == kTextureSize);

  const auto textures = load_textures(default_texture_dir());
  REQUIRE(static_cast<int>(textures.size()) == kTextureCount);
  for (int i = 0; i < kTextureCount; ++i) {
    const ImageU8 ref = builtin_texture(i);
    CHECK(textures[static_cast<size_t>(i)].pixels == ref.pixels);
  }
}

TEST_CASE("load_textures names the first missing file") {
  const fs::path dir = tmp_dir("no_textures");
  CHECK_THROWS_WITH_AS(load_textures(dir.string()),
                       doctest::Contains("texture_00.png"), AssetError);
}

TEST_CASE("synth_sample is seed-deterministic") {
  const auto textures = load_textures(default_texture_dir());
  const auto a = synth_sample(textures, PatternKind::O, 32, 999);
  const auto b = synth_sample(textures, PatternKind::O, 32, 999);
  REQUIRE(a.frames.size() == 21);
  for (size_t t = 0; t < a.frames.size(); ++t) {
    CHECK(a.frames[t].pixels == b.frames[t].pixels);
    CHECK(a.masks[t] == b.masks[t]);
  }
  const auto c = synth_sample(textures, PatternKind::O, 32, 1000);
  bool any_diff = false;
  for (size_t t = 0; t < a.frames.size(); ++t)
    if (a.frames[t].pixels != c.frames[t].pixels) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("synth_sample refuses images too small for the pattern") {
  const std::vector<ImageU8> textures = {builtin_texture(1)};
  // At size 8 the I pattern needs 13 rows of travel below the rectangle.
  CHECK_THROWS_WITH_AS(synth_sample(textures, PatternKind::I, 8, 1),
                       doctest::Contains("8x8"), GenerationError);
}

TEST_CASE("pad_sequence appends black frames and empty masks") {
  const std::vector<ImageU8> textures = {builtin_texture(2)};
  auto sample = synth_sample(textures, PatternKind::Scale, 32, 5);
  REQUIRE(sample.frames.size() == 17);
  pad_sequence(sample, 27);
  REQUIRE(sample.frames.size() == 27);
  REQUIRE(sample.masks.size() == 27);
  for (size_t t = 17; t < 27; ++t) {
    for (uint8_t v : sample.frames[t].pixels) CHECK(v == 0);
    for (uint8_t v : sample.masks[t]) CHECK(v == 0);
  }
  CHECK_THROWS_AS(pad_sequence(sample, 10), DimensionError);
}

TEST_CASE("test split arithmetic") {
  CHECK(dataset_test_count(20) == 1);
  CHECK(dataset_test_count(19) == 0);
  CHECK(dataset_test_count(0) == 0);
  CHECK(dataset_test_count(40) == 2);
  CHECK(dataset_test_count(1000) == 50);
  CHECK(dataset_test_count(2000) == 100);
}

TEST_CASE("dataset writes, reloads, and regenerates byte-identically") {
  const fs::path dir_a = tmp_dir("ds_a");
  const fs::path dir_b = tmp_dir("ds_b");
  const auto manifest = generate_dataset(default_texture_dir(), PatternKind::O,
                                         20, 16, 424242, dir_a.string());
  CHECK(manifest.train_count == 19);
  CHECK(manifest.test_count == 1);
  CHECK(manifest.seq_len == 21);

  const auto round = read_manifest(dir_a.string());
  CHECK(round.kind == PatternKind::O);
  CHECK(round.count == 20);
  CHECK(round.size == 16);
  CHECK(round.seq_len == 21);
  CHECK(round.seed == 424242);
  CHECK(round.train_count == 19);
  CHECK(round.test_count == 1);

  const Dataset train = load_dataset(dir_a.string(), Split::train);
  const Dataset test = load_dataset(dir_a.string(), Split::test);
  REQUIRE(train.samples.size() == 19);
  REQUIRE(test.samples.size() == 1);
  for (const auto& s : train.samples) {
    CHECK(s.h == 16);
    CHECK(s.w == 16);
    CHECK(s.frames.size() == 21);
    CHECK(s.masks.size() == 21);
  }

  // Stored samples equal direct generation with seed ^ index.
  const auto textures = load_textures(default_texture_dir());
  const auto direct0 = synth_sample(textures, PatternKind::O, 16, 424242 ^ 0u);
  const auto direct5 = synth_sample(textures, PatternKind::O, 16, 424242 ^ 5u);
  const auto direct19 = synth_sample(textures, PatternKind::O, 16, 424242 ^ 19u);
  for (size_t t = 0; t < 21; ++t) {
    CHECK(train.samples[0].frames[t].pixels == direct0.frames[t].pixels);
    CHECK(train.samples[0].masks[t] == direct0.masks[t]);
    CHECK(train.samples[5].frames[t].pixels == direct5.frames[t].pixels);
    CHECK(test.samples[0].frames[t].pixels == direct19.frames[t].pixels);
  }

  generate_dataset(default_texture_dir(), PatternKind::O, 20, 16, 424242,
                   dir_b.string());
  CHECK(slurp(dir_a / "train.bin") == slurp(dir_b / "train.bin"));
  CHECK(slurp(dir_a / "test.bin") == slurp(dir_b / "test.bin"));
  CHECK(slurp(dir_a / "manifest.txt") == slurp(dir_b / "manifest.txt"));
}

TEST_CASE("dataset loader rejects missing or inconsistent directories") {
  const fs::path dir = tmp_dir("ds_missing");
  CHECK_THROWS_AS(read_manifest(dir.string()), IoError);
  CHECK_THROWS_AS(load_dataset(dir.string(), Split::train), IoError);
}

TEST_CASE("mask bit packing is msb-first with padded rows") {
  ImageU8 bg(10, 10, 3);
  const RectSpec rect{3, 2, {1, 2, 3}};
  const std::vector<Pose> poses = {{4.5, 5.0, 0.0, 1.0, 1.0}};
  const auto sample = render_sample(bg, rect, poses, PatternKind::I);
  CHECK(sample.mask_stride() == 2);  // 10 px -> 2 bytes per row
  REQUIRE(sample.masks[0].size() == 20);
  // Rectangle covers x in {3,4,5}, y in {4,5}.
  for (int64_t y = 0; y < 10; ++y)
    for (int64_t x = 0; x < 10; ++x) {
      const bool inside = (y == 4 || y == 5) && (x >= 3 && x <= 5);
      CHECK(sample.mask_at(0, y, x) == inside);
    }
  // Byte-level check: row 4 is 00011100 00000000.
  CHECK(sample.masks[0][8] == 0x1c);
  CHECK(sample.masks[0][9] == 0x00);
}
