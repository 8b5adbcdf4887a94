#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace velo::kernels {

// Inner-loop kernels behind the tracker, pyramid and regressor. Each entry
// has a scalar reference implementation and, on x86 machines that support
// it, an AVX2 variant selected at runtime. Reductions accumulate in double
// on every backend so the variants agree to rounding noise and the tracker
// stays well-conditioned on long sums.
struct Backend {
  const char* name;

  // sum(a[i] * b[i])
  double (*dot_f32)(const float* a, const float* b, std::size_t n);

  // out = {sum a, sum b, sum a^2, sum b^2, sum a*b} (one pass, for NCC)
  void (*sums5_f32)(const float* a, const float* b, std::size_t n,
                    double out[5]);

  // out = {sum ix^2, sum ix*iy, sum iy^2} (LK structure tensor)
  void (*grad_moments_f32)(const float* ix, const float* iy, std::size_t n,
                           double out[3]);

  // out = {sum (t-p)*ix, sum (t-p)*iy} (LK mismatch vector)
  void (*flow_rhs_f32)(const float* ix, const float* iy, const float* t,
                       const float* p, std::size_t n, double out[2]);

  // win x win patch sampled bilinearly around (cx, cy); integer coordinates
  // clamp at the image border. Sample j,i sits at
  // (cx + i - (win-1)/2, cy + j - (win-1)/2).
  void (*patch_bilinear_f32)(const float* img, int w, int h, double cx,
                             double cy, int win, float* out);

  // dst[i] = sum_k wts[k] * rows[k][i] (vertical pass of the pyramid filter)
  void (*row_mix5_f32)(const float* const rows[5], const float wts[5],
                       float* dst, std::size_t n);

  // dst[x] = sum_k wts[k] * row[clamp(2x + k - 2)] (horizontal decimation)
  void (*decimate5_f32)(const float* row, int w, const float wts[5],
                        float* dst, int ow);

  double (*dot_f64)(const double* a, const double* b, std::size_t n);

  // y[i] += a * x[i]
  void (*axpy_f64)(double a, const double* x, double* y, std::size_t n);
};

const Backend& scalar();
const Backend* avx2();  // nullptr when the CPU lacks AVX2/FMA

// Active backend; defaults to the best one the CPU supports.
const Backend& active();

// "scalar", "avx2" or "auto". Returns false if the backend is unavailable.
bool select(const std::string& name);

std::vector<std::string> available();

}  // namespace velo::kernels
