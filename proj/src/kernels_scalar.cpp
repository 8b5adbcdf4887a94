#include "velo/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace velo::kernels {
namespace {

double dot_f32(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += double(a[i]) * double(b[i]);
  return s;
}

void sums5_f32(const float* a, const float* b, std::size_t n, double out[5]) {
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a[i], y = b[i];
    sa += x;
    sb += y;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
  }
  out[0] = sa;
  out[1] = sb;
  out[2] = saa;
  out[3] = sbb;
  out[4] = sab;
}

void grad_moments_f32(const float* ix, const float* iy, std::size_t n,
                      double out[3]) {
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double gx = ix[i], gy = iy[i];
    sxx += gx * gx;
    sxy += gx * gy;
    syy += gy * gy;
  }
  out[0] = sxx;
  out[1] = sxy;
  out[2] = syy;
}

void flow_rhs_f32(const float* ix, const float* iy, const float* t,
                  const float* p, std::size_t n, double out[2]) {
  double bx = 0, by = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = double(t[i]) - double(p[i]);
    bx += d * ix[i];
    by += d * iy[i];
  }
  out[0] = bx;
  out[1] = by;
}

void patch_bilinear_f32(const float* img, int w, int h, double cx, double cy,
                        int win, float* out) {
  const double half = (win - 1) * 0.5;
  const double sx = cx - half;
  const double sy = cy - half;
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  const float ax = float(sx - fx0);
  const float ay = float(sy - fy0);
  const float w00 = (1.0f - ax) * (1.0f - ay);
  const float w01 = ax * (1.0f - ay);
  const float w10 = (1.0f - ax) * ay;
  const float w11 = ax * ay;
  const int ix0 = int(fx0);
  const int iy0 = int(fy0);
  for (int j = 0; j < win; ++j) {
    const int y0 = std::clamp(iy0 + j, 0, h - 1);
    const int y1 = std::clamp(iy0 + j + 1, 0, h - 1);
    const float* r0 = img + std::size_t(y0) * w;
    const float* r1 = img + std::size_t(y1) * w;
    float* o = out + std::size_t(j) * win;
    for (int i = 0; i < win; ++i) {
      const int x0 = std::clamp(ix0 + i, 0, w - 1);
      const int x1 = std::clamp(ix0 + i + 1, 0, w - 1);
      o[i] = w00 * r0[x0] + w01 * r0[x1] + w10 * r1[x0] + w11 * r1[x1];
    }
  }
}

void row_mix5_f32(const float* const rows[5], const float wts[5], float* dst,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = wts[0] * rows[0][i] + wts[1] * rows[1][i] + wts[2] * rows[2][i] +
             wts[3] * rows[3][i] + wts[4] * rows[4][i];
  }
}

void decimate5_f32(const float* row, int w, const float wts[5], float* dst,
                   int ow) {
  for (int x = 0; x < ow; ++x) {
    float s = 0.0f;
    for (int k = 0; k < 5; ++k) {
      const int src = std::clamp(2 * x + k - 2, 0, w - 1);
      s += wts[k] * row[src];
    }
    dst[x] = s;
  }
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_f64(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

const Backend& scalar() {
  static const Backend k = {
      "scalar",     dot_f32,      sums5_f32,    grad_moments_f32,
      flow_rhs_f32, patch_bilinear_f32,         row_mix5_f32,
      decimate5_f32,
      dot_f64,      axpy_f64,
  };
  return k;
}

}  // namespace velo::kernels
