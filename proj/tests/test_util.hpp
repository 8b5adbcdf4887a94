#pragma once

#include <cmath>
#include <cstdint>

#include "velo/geometry.hpp"
#include "velo/rng.hpp"

namespace velo::testutil {

// Smooth band-limited test pattern; shifting (dx, dy) translates the image
// continuously, so warped frame pairs have an analytic ground truth.
inline float pattern(double x, double y) {
  const double v = std::sin(0.31 * x + 1.7) * std::cos(0.23 * y + 0.5) +
                   0.6 * std::sin(0.11 * x - 0.07 * y) +
                   0.4 * std::cos(0.053 * x + 0.19 * y + 2.1);
  return float(0.5 + 0.22 * v);  // stays inside [0, 1]
}

inline ImageFrame textured_frame(int w, int h, double dx = 0.0,
                                 double dy = 0.0) {
  ImageFrame f = ImageFrame::filled(w, h, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.px(x, y) = pattern(x - dx, y - dy);
    }
  }
  return f;
}

// next = prev zoomed by factor s about (cx, cy)
inline ImageFrame zoomed_frame(int w, int h, double s, double cx, double cy) {
  ImageFrame f = ImageFrame::filled(w, h, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.px(x, y) = pattern(cx + (x - cx) / s, cy + (y - cy) / s);
    }
  }
  return f;
}

// Non-periodic value-noise texture for template-matching tests where the
// sine pattern would alias under large shifts.
inline float noise_at(std::uint64_t seed, double x, double y) {
  const auto lattice = [seed](std::int64_t ix, std::int64_t iy) {
    const std::uint64_t h =
        mix_seed(seed, std::uint64_t(ix) * 0x9e3779b97f4a7c15ull,
                 std::uint64_t(iy));
    return double(h >> 11) * 0x1.0p-53;
  };
  const auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const auto octave = [&](double px, double py) {
    const double fx = std::floor(px), fy = std::floor(py);
    const double tx = smooth(px - fx), ty = smooth(py - fy);
    const std::int64_t ix = std::int64_t(fx), iy = std::int64_t(fy);
    return (1 - ty) * ((1 - tx) * lattice(ix, iy) + tx * lattice(ix + 1, iy)) +
           ty * ((1 - tx) * lattice(ix, iy + 1) + tx * lattice(ix + 1, iy + 1));
  };
  const double v = 0.65 * octave(x / 7.0, y / 7.0) +
                   0.35 * octave(x / 2.3 + 31.0, y / 2.3 - 17.0);
  return float(0.15 + 0.7 * v);
}

inline ImageFrame noise_frame(int w, int h, std::uint64_t seed,
                              double dx = 0.0, double dy = 0.0) {
  ImageFrame f = ImageFrame::filled(w, h, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.px(x, y) = noise_at(seed, x - dx, y - dy);
    }
  }
  return f;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.x + a.w, b.x + b.w);
  const double y1 = std::min(a.y + a.h, b.y + b.h);
  const double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
  return inter / (a.w * a.h + b.w * b.h - inter);
}

}  // namespace velo::testutil
