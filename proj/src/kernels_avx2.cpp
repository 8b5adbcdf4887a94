// AVX2/FMA variants of the scalar kernels. Compiled with -mavx2 -mfma in its
// own translation unit; only reached through the dispatch table after the
// cpuid check.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "velo/kernels.hpp"

namespace velo::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// float lanes widened to double before accumulating, matching the scalar
// reference
inline void cvt2(__m256 v, __m256d& lo, __m256d& hi) {
  lo = _mm256_cvtps_pd(_mm256_castps256_ps128(v));
  hi = _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1));
}

double dot_f32(const float* a, const float* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d a0, a1, b0, b1;
    cvt2(_mm256_loadu_ps(a + i), a0, a1);
    cvt2(_mm256_loadu_ps(b + i), b0, b1);
    acc0 = _mm256_fmadd_pd(a0, b0, acc0);
    acc1 = _mm256_fmadd_pd(a1, b1, acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += double(a[i]) * double(b[i]);
  return s;
}

void sums5_f32(const float* a, const float* b, std::size_t n, double out[5]) {
  __m256d sa = _mm256_setzero_pd(), sb = _mm256_setzero_pd();
  __m256d saa = _mm256_setzero_pd(), sbb = _mm256_setzero_pd();
  __m256d sab = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d a0, a1, b0, b1;
    cvt2(_mm256_loadu_ps(a + i), a0, a1);
    cvt2(_mm256_loadu_ps(b + i), b0, b1);
    sa = _mm256_add_pd(sa, _mm256_add_pd(a0, a1));
    sb = _mm256_add_pd(sb, _mm256_add_pd(b0, b1));
    saa = _mm256_fmadd_pd(a0, a0, saa);
    saa = _mm256_fmadd_pd(a1, a1, saa);
    sbb = _mm256_fmadd_pd(b0, b0, sbb);
    sbb = _mm256_fmadd_pd(b1, b1, sbb);
    sab = _mm256_fmadd_pd(a0, b0, sab);
    sab = _mm256_fmadd_pd(a1, b1, sab);
  }
  double ra = hsum(sa), rb = hsum(sb), raa = hsum(saa), rbb = hsum(sbb),
         rab = hsum(sab);
  for (; i < n; ++i) {
    const double x = a[i], y = b[i];
    ra += x;
    rb += y;
    raa += x * x;
    rbb += y * y;
    rab += x * y;
  }
  out[0] = ra;
  out[1] = rb;
  out[2] = raa;
  out[3] = rbb;
  out[4] = rab;
}

void grad_moments_f32(const float* ix, const float* iy, std::size_t n,
                      double out[3]) {
  __m256d sxx = _mm256_setzero_pd(), sxy = _mm256_setzero_pd(),
          syy = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d x0, x1, y0, y1;
    cvt2(_mm256_loadu_ps(ix + i), x0, x1);
    cvt2(_mm256_loadu_ps(iy + i), y0, y1);
    sxx = _mm256_fmadd_pd(x0, x0, sxx);
    sxx = _mm256_fmadd_pd(x1, x1, sxx);
    sxy = _mm256_fmadd_pd(x0, y0, sxy);
    sxy = _mm256_fmadd_pd(x1, y1, sxy);
    syy = _mm256_fmadd_pd(y0, y0, syy);
    syy = _mm256_fmadd_pd(y1, y1, syy);
  }
  double rxx = hsum(sxx), rxy = hsum(sxy), ryy = hsum(syy);
  for (; i < n; ++i) {
    const double gx = ix[i], gy = iy[i];
    rxx += gx * gx;
    rxy += gx * gy;
    ryy += gy * gy;
  }
  out[0] = rxx;
  out[1] = rxy;
  out[2] = ryy;
}

void flow_rhs_f32(const float* ix, const float* iy, const float* t,
                  const float* p, std::size_t n, double out[2]) {
  __m256d bx = _mm256_setzero_pd(), by = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d t0, t1, p0, p1, x0, x1, y0, y1;
    cvt2(_mm256_loadu_ps(t + i), t0, t1);
    cvt2(_mm256_loadu_ps(p + i), p0, p1);
    const __m256d d0 = _mm256_sub_pd(t0, p0);
    const __m256d d1 = _mm256_sub_pd(t1, p1);
    cvt2(_mm256_loadu_ps(ix + i), x0, x1);
    cvt2(_mm256_loadu_ps(iy + i), y0, y1);
    bx = _mm256_fmadd_pd(d0, x0, bx);
    bx = _mm256_fmadd_pd(d1, x1, bx);
    by = _mm256_fmadd_pd(d0, y0, by);
    by = _mm256_fmadd_pd(d1, y1, by);
  }
  double rbx = hsum(bx), rby = hsum(by);
  for (; i < n; ++i) {
    const double d = double(t[i]) - double(p[i]);
    rbx += d * ix[i];
    rby += d * iy[i];
  }
  out[0] = rbx;
  out[1] = rby;
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

  // Every element, on any path, uses the same fmaf chain: a pixel sampled
  // from two windows of different sizes must come out bit-identical or the
  // forward-backward error of a static scene would not be exactly zero.
  const auto one = [&](const float* r0, const float* r1, int x0, int x1) {
    return std::fmaf(w11, r1[x1],
                     std::fmaf(w10, r1[x0],
                               std::fmaf(w01, r0[x1], w00 * r0[x0])));
  };

  const bool interior = ix0 >= 0 && iy0 >= 0 && ix0 + win < w && iy0 + win < h;
  if (!interior) {
    for (int j = 0; j < win; ++j) {
      const int y0 = std::clamp(iy0 + j, 0, h - 1);
      const int y1 = std::clamp(iy0 + j + 1, 0, h - 1);
      const float* r0 = img + std::size_t(y0) * w;
      const float* r1 = img + std::size_t(y1) * w;
      float* o = out + std::size_t(j) * win;
      for (int i = 0; i < win; ++i) {
        const int x0 = std::clamp(ix0 + i, 0, w - 1);
        const int x1 = std::clamp(ix0 + i + 1, 0, w - 1);
        o[i] = one(r0, r1, x0, x1);
      }
    }
    return;
  }

  const __m256 v00 = _mm256_set1_ps(w00);
  const __m256 v01 = _mm256_set1_ps(w01);
  const __m256 v10 = _mm256_set1_ps(w10);
  const __m256 v11 = _mm256_set1_ps(w11);
  for (int j = 0; j < win; ++j) {
    const float* r0 = img + std::size_t(iy0 + j) * w + ix0;
    const float* r1 = r0 + w;
    float* o = out + std::size_t(j) * win;
    int i = 0;
    for (; i + 8 <= win; i += 8) {
      __m256 acc = _mm256_mul_ps(v00, _mm256_loadu_ps(r0 + i));
      acc = _mm256_fmadd_ps(v01, _mm256_loadu_ps(r0 + i + 1), acc);
      acc = _mm256_fmadd_ps(v10, _mm256_loadu_ps(r1 + i), acc);
      acc = _mm256_fmadd_ps(v11, _mm256_loadu_ps(r1 + i + 1), acc);
      _mm256_storeu_ps(o + i, acc);
    }
    for (; i < win; ++i) {
      o[i] = one(r0, r1, i, i + 1);
    }
  }
}

void row_mix5_f32(const float* const rows[5], const float wts[5], float* dst,
                  std::size_t n) {
  const __m256 k0 = _mm256_set1_ps(wts[0]);
  const __m256 k1 = _mm256_set1_ps(wts[1]);
  const __m256 k2 = _mm256_set1_ps(wts[2]);
  const __m256 k3 = _mm256_set1_ps(wts[3]);
  const __m256 k4 = _mm256_set1_ps(wts[4]);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 acc = _mm256_mul_ps(k0, _mm256_loadu_ps(rows[0] + i));
    acc = _mm256_fmadd_ps(k1, _mm256_loadu_ps(rows[1] + i), acc);
    acc = _mm256_fmadd_ps(k2, _mm256_loadu_ps(rows[2] + i), acc);
    acc = _mm256_fmadd_ps(k3, _mm256_loadu_ps(rows[3] + i), acc);
    acc = _mm256_fmadd_ps(k4, _mm256_loadu_ps(rows[4] + i), acc);
    _mm256_storeu_ps(dst + i, acc);
  }
  for (; i < n; ++i) {
    dst[i] = wts[0] * rows[0][i] + wts[1] * rows[1][i] + wts[2] * rows[2][i] +
             wts[3] * rows[3][i] + wts[4] * rows[4][i];
  }
}

// even/odd elements of row[base .. base+15]
inline __m256 gather_stride2(const float* p, int parity) {
  const __m256 lo = _mm256_loadu_ps(p + parity);
  const __m256 hi = _mm256_loadu_ps(p + parity + 8);
  const __m256 mixed = _mm256_shuffle_ps(lo, hi, _MM_SHUFFLE(2, 0, 2, 0));
  const __m256i order = _mm256_setr_epi32(0, 1, 4, 5, 2, 3, 6, 7);
  return _mm256_permutevar8x32_ps(mixed, order);
}

void decimate5_f32(const float* row, int w, const float wts[5], float* dst,
                   int ow) {
  int x = 0;
  // left border and short rows handled by the reference loop
  const auto scalar_one = [&](int xx) {
    float s = 0.0f;
    for (int k = 0; k < 5; ++k) {
      const int src = std::clamp(2 * xx + k - 2, 0, w - 1);
      s += wts[k] * row[src];
    }
    dst[xx] = s;
  };
  while (x < ow && 2 * x - 2 < 0) scalar_one(x++);

  const __m256 k0 = _mm256_set1_ps(wts[0]);
  const __m256 k1 = _mm256_set1_ps(wts[1]);
  const __m256 k2 = _mm256_set1_ps(wts[2]);
  const __m256 k3 = _mm256_set1_ps(wts[3]);
  const __m256 k4 = _mm256_set1_ps(wts[4]);
  // vector body needs row[2x-2 .. 2x+16] in bounds for 8 outputs
  for (; x + 8 <= ow && 2 * (x + 7) + 2 + 1 < w; x += 8) {
    const float* base = row + 2 * x - 2;
    __m256 acc = _mm256_mul_ps(k0, gather_stride2(base, 0));
    acc = _mm256_fmadd_ps(k1, gather_stride2(base, 1), acc);
    acc = _mm256_fmadd_ps(k2, gather_stride2(base + 2, 0), acc);
    acc = _mm256_fmadd_ps(k3, gather_stride2(base + 2, 1), acc);
    acc = _mm256_fmadd_ps(k4, gather_stride2(base + 4, 0), acc);
    _mm256_storeu_ps(dst + x, acc);
  }
  while (x < ow) scalar_one(x++);
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_f64(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r =
        _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(y + i, r);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

const Backend avx2_backend = {
    "avx2",       dot_f32,      sums5_f32,    grad_moments_f32,
    flow_rhs_f32, patch_bilinear_f32,         row_mix5_f32,
    decimate5_f32,
    dot_f64,      axpy_f64,
};

}  // namespace

const Backend* avx2_impl() { return &avx2_backend; }

}  // namespace velo::kernels

#else

namespace velo::kernels {
const Backend* avx2_impl() { return nullptr; }
}  // namespace velo::kernels

#endif
