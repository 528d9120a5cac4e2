// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "cinemagen/errors.hpp"
#include "cinemagen/metrics.hpp"
#include "cinemagen/synthetic.hpp"
#include "cinemagen/tensor.hpp"
#include "doctest.h"
#include "support/metric_oracles.hpp"

using namespace cinemagen;

namespace {

ImageD constant_image(int64_t h, int64_t w, int64_t c, double v) {
  ImageD img(h, w, c);
  for (double& p : img.pixels) p = v;
  return img;
}

// MSB-first bit setter matching SyntheticSample::mask_at.
void set_mask(SyntheticSample& s, size_t frame, int64_t y, int64_t x) {
  const int64_t stride = s.mask_stride();
  s.masks[frame][static_cast<size_t>(y * stride + (x >> 3))] |=
      static_cast<uint8_t>(1u << (7 - (x & 7)));
}

// Asymmetric 3x3 gradient patch on black: no translated copy of it matches
// itself, so the SSD minimum is unique wherever we stamp it.
void stamp_patch(ImageU8& img, int64_t y, int64_t x) {
  for (int64_t py = 0; py < 3; ++py)
    for (int64_t px = 0; px < 3; ++px)
      for (int64_t c = 0; c < 3; ++c)
        img.at(y + py, x + px, c) =
            static_cast<uint8_t>(40 + 20 * py + 60 * px + 5 * c);
}

// One truth frame with the patch + mask at (y, x).
void add_frame(SyntheticSample& s, int64_t y, int64_t x) {
  ImageU8 frame(s.h, s.w, 3);
  s.frames.push_back(frame);
  s.masks.emplace_back(static_cast<size_t>(s.h * s.mask_stride()), 0);
  const size_t f = s.frames.size() - 1;
  if (y >= 0) {
    stamp_patch(s.frames[f], y, x);
    for (int64_t py = 0; py < 3; ++py)
      for (int64_t px = 0; px < 3; ++px) set_mask(s, f, y + py, x + px);
  }
}

SyntheticSample empty_sample(int64_t size) {
  SyntheticSample s;
  s.h = size;
  s.w = size;
  return s;
}

// Generated frame: the same patch rendered at (y, x), as a unit image.
ImageD gen_frame(int64_t size, int64_t y, int64_t x) {
  ImageU8 img(size, size, 3);
  stamp_patch(img, y, x);
  return to_unit(img);
}

}  // namespace

TEST_CASE("psnr fixtures and oracle agreement") {
  const ImageD a = oracle::random_imaged(16, 16, 3, 77);
  CHECK(psnr(a, a) == 99.0);

  const ImageD zero = constant_image(8, 8, 3, 0.0);
  const ImageD half = constant_image(8, 8, 3, 0.5);
  // MSE 0.25 exactly.
  CHECK(psnr(zero, half) == doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));

  const ImageD b = oracle::random_imaged(16, 16, 3, 78);
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK(psnr(a, b) == doctest::Approx(oracle::psnr_ref(a, b)).epsilon(1e-12));

  // Near-identical images must still hit the cap, not exceed it.
  ImageD c = a;
  c.pixels[0] += 1e-9;
  CHECK(psnr(a, c) == 99.0);

  CHECK_THROWS_AS(psnr(a, constant_image(16, 15, 3, 0.0)), DimensionError);
  CHECK_THROWS_AS(psnr(a, constant_image(16, 16, 1, 0.0)), DimensionError);
}

TEST_CASE("ssim matches the direct-formula reference") {
  const struct {
    int64_t h, w, c;
  } sizes[] = {{11, 11, 1}, {16, 16, 3}, {21, 13, 3}, {32, 32, 3}, {12, 19, 2}};
  uint64_t seed = 100;
  for (const auto& sz : sizes) {
    const ImageD a = oracle::random_imaged(sz.h, sz.w, sz.c, seed++);
    const ImageD b = oracle::random_imaged(sz.h, sz.w, sz.c, seed++);
    const double got = ssim(a, b);
    const double want = oracle::ssim_ref(a, b);
    CHECK(std::abs(got - want) < 1e-6);
  }
}

TEST_CASE("ssim identity, contrast inversion, and size limits") {
  const ImageD a = oracle::random_imaged(16, 16, 3, 5);
  CHECK(ssim(a, a) == 1.0);  // bitwise, not approximately

  // Checkerboard vs its photographic negative: means match, structure is
  // anti-correlated, so the score goes negative.
  ImageD board(16, 16, 1);
  for (int64_t y = 0; y < 16; ++y)
    for (int64_t x = 0; x < 16; ++x)
      board.at(y, x, 0) = ((y + x) & 1) ? 0.9 : 0.1;
  ImageD negative(16, 16, 1);
  for (size_t i = 0; i < board.pixels.size(); ++i)
    negative.pixels[i] = 1.0 - board.pixels[i];
  CHECK(ssim(board, negative) < 0.0);

  CHECK_THROWS_AS(ssim(constant_image(8, 8, 3, 0.5), constant_image(8, 8, 3, 0.5)),
                  DimensionError);
  CHECK_THROWS_AS(ssim(a, constant_image(16, 12, 3, 0.0)), DimensionError);
}

TEST_CASE("sequence metrics aggregate per-frame scores") {
  std::vector<ImageD> truth;
  for (uint64_t i = 0; i < 3; ++i)
    truth.push_back(oracle::random_imaged(16, 16, 3, 200 + i));

  const FrameScores ident = sequence_metrics(truth, truth);
  REQUIRE(ident.psnr.size() == 3);
  for (double v : ident.psnr) CHECK(v == 99.0);
  for (double v : ident.ssim) CHECK(v == 1.0);
  CHECK(ident.mean_psnr == 99.0);
  CHECK(ident.mean_ssim == 1.0);

  std::vector<ImageD> noisy = truth;
  noisy[1] = oracle::random_imaged(16, 16, 3, 999);
  const FrameScores scores = sequence_metrics(noisy, truth);
  CHECK(scores.mean_psnr < ident.mean_psnr);
  CHECK(scores.mean_ssim < ident.mean_ssim);
  // The aggregate is exactly the mean of independent single-frame calls.
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (size_t t = 0; t < 3; ++t) {
    CHECK(scores.psnr[t] == psnr(noisy[t], truth[t]));
    CHECK(scores.ssim[t] == ssim(noisy[t], truth[t]));
    psnr_sum += scores.psnr[t];
    ssim_sum += scores.ssim[t];
  }
  CHECK(scores.mean_psnr == doctest::Approx(psnr_sum / 3.0).epsilon(1e-15));
  CHECK(scores.mean_ssim == doctest::Approx(ssim_sum / 3.0).epsilon(1e-15));

  CHECK_THROWS_AS(sequence_metrics({}, {}), DimensionError);
  std::vector<ImageD> two(truth.begin(), truth.begin() + 2);
  CHECK_THROWS_AS(sequence_metrics(two, truth), DimensionError);
}

TEST_CASE("difference metrics score motion, not content") {
  // Constant frames: gen steps 0 -> 0.5 -> 0.5, truth 0 -> 0.25 -> 0.5.
  // Both difference frames disagree by 0.25 everywhere, so each per-frame
  // MSE is 1/16.
  std::vector<ImageD> gen = {constant_image(16, 16, 3, 0.0),
                             constant_image(16, 16, 3, 0.5),
                             constant_image(16, 16, 3, 0.5)};
  std::vector<ImageD> truth = {constant_image(16, 16, 3, 0.0),
                               constant_image(16, 16, 3, 0.25),
                               constant_image(16, 16, 3, 0.5)};
  const FrameScores scores = difference_metrics(gen, truth);
  REQUIRE(scores.psnr.size() == 2);
  const double want = 10.0 * std::log10(16.0);
  CHECK(scores.psnr[0] == doctest::Approx(want).epsilon(1e-12));
  CHECK(scores.psnr[1] == doctest::Approx(want).epsilon(1e-12));
  CHECK(scores.mean_psnr == doctest::Approx(want).epsilon(1e-12));

  // Two motionless sequences have identical (zero) difference streams even
  // when their content differs.
  std::vector<ImageD> flat_a(3, constant_image(16, 16, 3, 0.8));
  std::vector<ImageD> flat_b(3, constant_image(16, 16, 3, 0.1));
  const FrameScores flat = difference_metrics(flat_a, flat_b);
  CHECK(flat.mean_psnr == 99.0);
  CHECK(flat.mean_ssim == 1.0);

  std::vector<ImageD> one = {constant_image(16, 16, 3, 0.0)};
  CHECK_THROWS_AS(difference_metrics(one, one), DimensionError);
  std::vector<ImageD> two(gen.begin(), gen.begin() + 2);
  CHECK_THROWS_AS(difference_metrics(gen, two), DimensionError);
}

TEST_CASE("constant baseline repeats the input frame") {
  const ImageD x = oracle::random_imaged(16, 16, 3, 42);
  const auto frames = constant_baseline(x, 4);
  REQUIRE(frames.size() == 4);
  for (const auto& f : frames) CHECK(f.pixels == x.pixels);
  CHECK_THROWS_AS(constant_baseline(x, 0), ConfigError);
  CHECK_THROWS_AS(constant_baseline(x, -3), ConfigError);
}

TEST_CASE("center distance: exact match scores zero") {
  SyntheticSample s = empty_sample(16);
  add_frame(s, 4, 5);
  CHECK(center_distance({gen_frame(16, 4, 5)}, s, 0) == 0.0);
}

TEST_CASE("center distance equals the Euclidean offset of the match") {
  SyntheticSample s = empty_sample(16);
  add_frame(s, 2, 3);
  CHECK(center_distance({gen_frame(16, 2, 6)}, s, 0) == 3.0);        // (0,3)
  CHECK(center_distance({gen_frame(16, 6, 6)}, s, 0) == 5.0);        // (4,3)
  CHECK(center_distance({gen_frame(16, 9, 3)}, s, 0) == 7.0);        // (7,0)
  CHECK(center_distance({gen_frame(16, 3, 5)}, s, 0) == std::hypot(1.0, 2.0));
}

TEST_CASE("center distance averages over frames") {
  SyntheticSample s = empty_sample(16);
  add_frame(s, 4, 4);
  add_frame(s, 4, 4);
  const std::vector<ImageD> gen = {gen_frame(16, 4, 4),   // distance 0
                                   gen_frame(16, 4, 8)};  // distance 4
  CHECK(center_distance(gen, s, 0) == 2.0);
}

TEST_CASE("center distance skips empty-mask frames") {
  SyntheticSample s = empty_sample(16);
  add_frame(s, 4, 4);
  add_frame(s, -1, -1);  // black frame, empty mask
  add_frame(s, 4, 4);
  const std::vector<ImageD> gen = {gen_frame(16, 4, 7),   // distance 3
                                   gen_frame(16, 0, 0),   // skipped
                                   gen_frame(16, 8, 4)};  // distance 4
  CHECK(center_distance(gen, s, 0) == 3.5);

  SyntheticSample blanks = empty_sample(16);
  add_frame(blanks, -1, -1);
  add_frame(blanks, -1, -1);
  const std::vector<ImageD> two = {gen_frame(16, 4, 4), gen_frame(16, 4, 4)};
  CHECK_THROWS_AS(center_distance(two, blanks, 0), GenerationError);
}

TEST_CASE("center distance ties keep the first row-major position") {
  SyntheticSample s = empty_sample(16);
  add_frame(s, 8, 8);
  // Two perfect copies of the template; the scan finds (2,2) first.
  ImageU8 img(16, 16, 3);
  stamp_patch(img, 2, 2);
  stamp_patch(img, 8, 8);
  CHECK(center_distance({to_unit(img)}, s, 0) == std::hypot(6.0, 6.0));
}

TEST_CASE("center distance honors the frame offset") {
  SyntheticSample s = empty_sample(16);
  add_frame(s, 2, 2);
  add_frame(s, 2, 3);
  add_frame(s, 2, 4);
  // generated[t] lines up with truth frame t+1.
  const std::vector<ImageD> gen = {gen_frame(16, 2, 3), gen_frame(16, 2, 4)};
  CHECK(center_distance(gen, s, 1) == 0.0);
  // Offset 2 aligns a single frame with truth frame 2, one pixel off.
  CHECK(center_distance({gen_frame(16, 2, 3)}, s, 2) == 1.0);
}

TEST_CASE("center distance rejects bad shapes and ranges") {
  SyntheticSample s = empty_sample(16);
  add_frame(s, 2, 2);
  ImageU8 small(8, 8, 3);
  stamp_patch(small, 2, 2);
  CHECK_THROWS_AS(center_distance({to_unit(small)}, s, 0), DimensionError);
  const std::vector<ImageD> gen = {gen_frame(16, 2, 2), gen_frame(16, 2, 2)};
  CHECK_THROWS_AS(center_distance(gen, s, 1), DimensionError);
}

TEST_CASE("tensor_to_unit maps [-1,1] onto [0,1] and clamps") {
  Tensor frames({2, 3, 2, 2});
  float* d = frames.data();
  for (int64_t i = 0; i < frames.size(); ++i) d[i] = -1.0f;
  // Batch row 1, channel 0: corners at the interesting values.
  const int64_t base = 1 * 3 * 4;
  d[base + 0] = -1.0f;
  d[base + 1] = 0.0f;
  d[base + 2] = 1.0f;
  d[base + 3] = 3.0f;   // clamps to 1
  d[base + 4] = -5.0f;  // channel 1 starts here; clamps to 0

  const ImageD img = tensor_to_unit(frames, 1);
  CHECK(img.h == 2);
  CHECK(img.w == 2);
  CHECK(img.c == 3);
  CHECK(img.at(0, 0, 0) == 0.0);
  CHECK(img.at(0, 1, 0) == 0.5);
  CHECK(img.at(1, 0, 0) == 1.0);
  CHECK(img.at(1, 1, 0) == 1.0);
  CHECK(img.at(0, 0, 1) == 0.0);

  const ImageD row0 = tensor_to_unit(frames, 0);
  for (double v : row0.pixels) CHECK(v == 0.0);

  CHECK_THROWS_AS(tensor_to_unit(Tensor({2, 1, 2, 2}), 0), DimensionError);
  CHECK_THROWS_AS(tensor_to_unit(Tensor({4, 4}), 0), DimensionError);
}
