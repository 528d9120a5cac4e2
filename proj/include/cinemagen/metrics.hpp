// SPDX-License-Identifier: Apache-2.0
#pragma once

// Frame-quality metrics in the [0,1] pixel convention: PSNR (capped),
// windowed SSIM, sequence and frame-difference aggregation, and the
// template-match center-distance measure for synthetic data.

#include <cstdint>
#include <vector>

#include "cinemagen/image.hpp"
#include "cinemagen/synthetic.hpp"
#include "cinemagen/tensor.hpp"

namespace cinemagen {

// 10*log10(1/MSE) over all pixels and channels, capped at 99.0 dB (the cap
// also applies to identical images, whose MSE is zero).
double psnr(const ImageD& a, const ImageD& b);

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1.0, color reduced to grayscale by channel mean, windows
// fully inside the image. SSIM(a, a) == 1.0 exactly.
double ssim(const ImageD& a, const ImageD& b);

struct FrameScores {
  std::vector<double> psnr;
  std::vector<double> ssim;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

// Per-frame PSNR/SSIM of aligned sequences plus their means.
FrameScores sequence_metrics(const std::vector<ImageD>& generated,
                             const std::vector<ImageD>& truth);

// Same scores on |frame_{t+1} - frame_t| difference streams (length n-1).
FrameScores difference_metrics(const std::vector<ImageD>& generated,
                               const std::vector<ImageD>& truth);

// n copies of x: the no-motion reference method.
std::vector<ImageD> constant_baseline(const ImageD& x, int64_t n);

// Per frame: crop the foreground template from the truth frame via its mask,
// exhaustively match it against the generated frame by masked SSD (ties ->
// first position row-major), and measure the Euclidean distance between the
// matched center and the truth center. Mean over frames with nonempty masks;
// generated[t] is aligned with truth frame t + offset.
double center_distance(const std::vector<ImageD>& generated,
                       const SyntheticSample& truth, int64_t offset);

// Model-space helpers: row b of a [B,3,H,W] tensor in [-1,1] to a [0,1]
// image, and the u8 dataset frames likewise.
ImageD tensor_to_unit(const Tensor& frames, int64_t b);

}  // namespace cinemagen
