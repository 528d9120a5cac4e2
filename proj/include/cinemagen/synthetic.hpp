// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic moving-rectangle sequences: a textured static background plus a
// single solid rectangle sweeping a fixed pattern. Backgrounds, rectangle
// geometry and colors are randomized per sample; the motion path per pattern
// is deterministic given its start pose.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cinemagen/image.hpp"
#include "cinemagen/rng.hpp"

namespace cinemagen {

enum class PatternKind { I, O, L, Eight, Rotate, Scale };

// Sequence length (number of poses) per pattern.
int64_t pattern_length(PatternKind kind);
std::string pattern_name(PatternKind kind);
PatternKind pattern_from_name(const std::string& name);
const std::vector<PatternKind>& all_patterns();

struct Pose {
  double cx, cy;   // rectangle center
  double angle;    // radians, counterclockwise
  double sx, sy;   // scale factors on the half extents
};

struct RectSpec {
  int64_t w, h;
  std::array<uint8_t, 3> color;
};

// Poses for `kind` starting with the rectangle's top-left corner at (x0, y0).
// Translation step size scales with the image size (1px per 32px of extent).
std::vector<Pose> make_trajectory(PatternKind kind, int64_t img_size,
                                  const RectSpec& rect, int64_t x0, int64_t y0);

int64_t trajectory_step(int64_t img_size);
bool pose_in_bounds(const Pose& pose, const RectSpec& rect, int64_t img_h,
                    int64_t img_w);

struct SyntheticSample {
  PatternKind kind = PatternKind::I;
  int64_t h = 0, w = 0;
  std::vector<ImageU8> frames;
  // 1 bit per pixel, MSB-first within a byte, rows padded to whole bytes.
  std::vector<std::vector<uint8_t>> masks;

  int64_t mask_stride() const { return (w + 7) / 8; }
  bool mask_at(size_t frame, int64_t y, int64_t x) const {
    return (masks[frame][y * mask_stride() + (x >> 3)] >> (7 - (x & 7))) & 1;
  }
};

// Nearest-neighbor resize of a bundled texture plus an independent uniform
// [0.90, 1.10] gain per channel (three draws, R G B order).
ImageU8 make_background(const ImageU8& texture, int64_t size, Rng& rng);

SyntheticSample render_sample(const ImageU8& background, const RectSpec& rect,
                              const std::vector<Pose>& poses, PatternKind kind);

// Full single-sample pipeline. Fixed draw order: texture id, background
// gains, rectangle color, then (size, start) proposals until one fits.
SyntheticSample synth_sample(const std::vector<ImageU8>& textures,
                             PatternKind kind, int64_t size, uint64_t seed);

// Appends black frames with empty masks up to target_len.
void pad_sequence(SyntheticSample& sample, int64_t target_len);

enum class Split { train, test };

struct DatasetManifest {
  PatternKind kind = PatternKind::I;
  int64_t count = 0;
  int64_t size = 0;
  int64_t seq_len = 0;
  uint64_t seed = 0;
  int64_t train_count = 0;
  int64_t test_count = 0;
};

// Last 5% of samples (count/20, rounded down) form the held-out test split.
int64_t dataset_test_count(int64_t count);

// Writes train.bin, test.bin and manifest.txt. Sample i derives its stream
// from seed ^ i, so regeneration is byte-identical per sample.
DatasetManifest generate_dataset(const std::string& texture_dir,
                                 PatternKind kind, int64_t count, int64_t size,
                                 uint64_t seed, const std::string& out_dir);

struct Dataset {
  DatasetManifest manifest;
  std::vector<SyntheticSample> samples;
};

DatasetManifest read_manifest(const std::string& dir);
Dataset load_dataset(const std::string& dir, Split split);

}  // namespace cinemagen
