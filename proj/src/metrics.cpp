// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/metrics.hpp"

#include <cmath>
#include <limits>

#include "cinemagen/errors.hpp"

namespace cinemagen {

namespace {

constexpr double kPsnrCap = 99.0;
constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

void check_same_shape(const ImageD& a, const ImageD& b, const char* who) {
  if (a.h != b.h || a.w != b.w || a.c != b.c) {
    throw DimensionError(std::string(who) + ": image shapes differ");
  }
}

// Normalized 11x11 Gaussian, separable but built dense for clarity.
const std::vector<double>& gaussian_window() {
  static const std::vector<double> win = [] {
    std::vector<double> w(kWin * kWin);
    double total = 0.0;
    for (int y = 0; y < kWin; ++y)
      for (int x = 0; x < kWin; ++x) {
        const double dy = y - (kWin - 1) / 2.0;
        const double dx = x - (kWin - 1) / 2.0;
        const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        w[static_cast<size_t>(y * kWin + x)] = v;
        total += v;
      }
    for (double& v : w) v /= total;
    return w;
  }();
  return win;
}

std::vector<double> grayscale(const ImageD& img) {
  std::vector<double> g(static_cast<size_t>(img.h * img.w));
  for (int64_t y = 0; y < img.h; ++y)
    for (int64_t x = 0; x < img.w; ++x) {
      double acc = 0.0;
      for (int64_t c = 0; c < img.c; ++c) acc += img.at(y, x, c);
      g[static_cast<size_t>(y * img.w + x)] = acc / static_cast<double>(img.c);
    }
  return g;
}

ImageD abs_difference(const ImageD& a, const ImageD& b) {
  ImageD out(a.h, a.w, a.c);
  for (size_t i = 0; i < a.pixels.size(); ++i)
    out.pixels[i] = std::abs(a.pixels[i] - b.pixels[i]);
  return out;
}

struct MaskBox {
  int64_t x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive
  bool empty() const { return x1 < x0 || y1 < y0; }
  int64_t w() const { return x1 - x0 + 1; }
  int64_t h() const { return y1 - y0 + 1; }
};

MaskBox mask_bounds(const SyntheticSample& s, size_t frame) {
  MaskBox box;
  box.x0 = s.w;
  box.y0 = s.h;
  for (int64_t y = 0; y < s.h; ++y)
    for (int64_t x = 0; x < s.w; ++x)
      if (s.mask_at(frame, y, x)) {
        box.x0 = std::min(box.x0, x);
        box.y0 = std::min(box.y0, y);
        box.x1 = std::max(box.x1, x);
        box.y1 = std::max(box.y1, y);
      }
  return box;
}

}  // namespace

double psnr(const ImageD& a, const ImageD& b) {
  check_same_shape(a, b, "psnr");
  double acc = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.pixels.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const ImageD& a, const ImageD& b) {
  check_same_shape(a, b, "ssim");
  if (a.h < kWin || a.w < kWin) {
    throw DimensionError("ssim: image smaller than the 11x11 window");
  }
  const auto ga = grayscale(a);
  const auto gb = grayscale(b);
  const auto& win = gaussian_window();

  double total = 0.0;
  int64_t count = 0;
  for (int64_t y = 0; y + kWin <= a.h; ++y) {
    for (int64_t x = 0; x + kWin <= a.w; ++x) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int wy = 0; wy < kWin; ++wy)
        for (int wx = 0; wx < kWin; ++wx) {
          const double wgt = win[static_cast<size_t>(wy * kWin + wx)];
          const double av = ga[static_cast<size_t>((y + wy) * a.w + x + wx)];
          const double bv = gb[static_cast<size_t>((y + wy) * a.w + x + wx)];
          sx += wgt * av;
          sy += wgt * bv;
          sxx += wgt * av * av;
          syy += wgt * bv * bv;
          sxy += wgt * av * bv;
        }
      const double vx = sxx - sx * sx;
      const double vy = syy - sy * sy;
      const double cxy = sxy - sx * sy;
      const double num = (2.0 * sx * sy + kC1) * (2.0 * cxy + kC2);
      const double den = (sx * sx + sy * sy + kC1) * (vx + vy + kC2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

FrameScores sequence_metrics(const std::vector<ImageD>& generated,
                             const std::vector<ImageD>& truth) {
  if (generated.empty() || generated.size() != truth.size()) {
    throw DimensionError("sequence_metrics: lengths differ, " +
                         std::to_string(generated.size()) + " vs " +
                         std::to_string(truth.size()));
  }
  FrameScores scores;
  for (size_t t = 0; t < generated.size(); ++t) {
    scores.psnr.push_back(psnr(generated[t], truth[t]));
    scores.ssim.push_back(ssim(generated[t], truth[t]));
  }
  for (double v : scores.psnr) scores.mean_psnr += v;
  for (double v : scores.ssim) scores.mean_ssim += v;
  scores.mean_psnr /= static_cast<double>(scores.psnr.size());
  scores.mean_ssim /= static_cast<double>(scores.ssim.size());
  return scores;
}

FrameScores difference_metrics(const std::vector<ImageD>& generated,
                               const std::vector<ImageD>& truth) {
  if (generated.size() < 2 || generated.size() != truth.size()) {
    throw DimensionError(
        "difference_metrics: need two aligned frames at least, got " +
        std::to_string(generated.size()) + " vs " +
        std::to_string(truth.size()));
  }
  std::vector<ImageD> dg, dt;
  for (size_t t = 0; t + 1 < generated.size(); ++t) {
    dg.push_back(abs_difference(generated[t + 1], generated[t]));
    dt.push_back(abs_difference(truth[t + 1], truth[t]));
  }
  return sequence_metrics(dg, dt);
}

std::vector<ImageD> constant_baseline(const ImageD& x, int64_t n) {
  if (n < 1) throw ConfigError("constant_baseline: n must be >= 1");
  return std::vector<ImageD>(static_cast<size_t>(n), x);
}

double center_distance(const std::vector<ImageD>& generated,
                       const SyntheticSample& truth, int64_t offset) {
  double total = 0.0;
  int64_t used = 0;
  for (size_t t = 0; t < generated.size(); ++t) {
    const size_t f = t + static_cast<size_t>(offset);
    if (f >= truth.frames.size()) {
      throw DimensionError("center_distance: frame " + std::to_string(f) +
                           " beyond truth length " +
                           std::to_string(truth.frames.size()));
    }
    const MaskBox box = mask_bounds(truth, f);
    if (box.empty()) continue;  // nothing to localize in this frame

    const ImageD& gen = generated[t];
    if (gen.h != truth.h || gen.w != truth.w) {
      throw DimensionError("center_distance: generated frame shape differs");
    }
    const ImageD truth_unit = to_unit(truth.frames[f]);

    double best = std::numeric_limits<double>::infinity();
    int64_t best_y = 0, best_x = 0;
    for (int64_t oy = 0; oy + box.h() <= gen.h; ++oy) {
      for (int64_t ox = 0; ox + box.w() <= gen.w; ++ox) {
        double score = 0.0;
        for (int64_t py = 0; py < box.h(); ++py)
          for (int64_t px = 0; px < box.w(); ++px) {
            if (!truth.mask_at(f, box.y0 + py, box.x0 + px)) continue;
            for (int64_t c = 0; c < 3; ++c) {
              const double d = gen.at(oy + py, ox + px, c) -
                               truth_unit.at(box.y0 + py, box.x0 + px, c);
              score += d * d;
            }
          }
        if (score < best) {  // strict: ties keep the first row-major hit
          best = score;
          best_y = oy;
          best_x = ox;
        }
      }
    }
    const double dx = static_cast<double>(best_x - box.x0);
    const double dy = static_cast<double>(best_y - box.y0);
    total += std::hypot(dx, dy);
    ++used;
  }
  if (used == 0) {
    throw GenerationError("center_distance: every truth mask is empty");
  }
  return total / static_cast<double>(used);
}

ImageD tensor_to_unit(const Tensor& frames, int64_t b) {
  if (frames.shape().size() != 4 || frames.dim(1) != 3) {
    throw DimensionError("tensor_to_unit: expected [B,3,H,W], got " +
                         shape_str(frames.shape()));
  }
  const int64_t h = frames.dim(2), w = frames.dim(3), hw = h * w;
  const float* src = frames.data() + b * 3 * hw;
  ImageD img(h, w, 3);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        const double unit = (static_cast<double>(src[c * hw + y * w + x]) + 1.0) / 2.0;
        img.at(y, x, c) = std::min(1.0, std::max(0.0, unit));
      }
  return img;
}

}  // namespace cinemagen
