#include "velo/kernels.hpp"

#include <cmath>
#include <vector>

#include <doctest.h>

#include "velo/rng.hpp"

using namespace velo;

namespace {

std::vector<float> random_floats(Rng& rng, std::size_t n, double lo = -1.0,
                                 double hi = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = float(rng.uniform(lo, hi));
  return v;
}

}  // namespace

TEST_CASE("scalar dot matches long-double reference") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.index(300);
    const auto a = random_floats(rng, n);
    const auto b = random_floats(rng, n);
    long double ref = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      ref += (long double)(a[i]) * (long double)(b[i]);
    }
    const double got = kernels::scalar().dot_f32(a.data(), b.data(), n);
    CHECK(got == doctest::Approx(double(ref)).epsilon(1e-12));
  }
}

TEST_CASE("scalar patch sampler agrees with direct bilinear evaluation") {
  Rng rng(5);
  const int w = 40, h = 30;
  const auto img = random_floats(rng, std::size_t(w) * h, 0.0, 1.0);
  const auto at = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return img[std::size_t(y) * w + x];
  };
  for (int trial = 0; trial < 30; ++trial) {
    const double cx = rng.uniform(-2.0, w + 2.0);
    const double cy = rng.uniform(-2.0, h + 2.0);
    const int win = 5;
    std::vector<float> patch(std::size_t(win) * win);
    kernels::scalar().patch_bilinear_f32(img.data(), w, h, cx, cy, win,
                                         patch.data());
    for (int j = 0; j < win; ++j) {
      for (int i = 0; i < win; ++i) {
        const double sx = cx + i - (win - 1) / 2.0;
        const double sy = cy + j - (win - 1) / 2.0;
        const int x0 = int(std::floor(sx));
        const int y0 = int(std::floor(sy));
        const float ax = float(sx - x0);
        const float ay = float(sy - y0);
        const float expect =
            (1 - ax) * (1 - ay) * at(x0, y0) + ax * (1 - ay) * at(x0 + 1, y0) +
            (1 - ax) * ay * at(x0, y0 + 1) + ax * ay * at(x0 + 1, y0 + 1);
        CHECK(patch[std::size_t(j) * win + i] ==
              doctest::Approx(expect).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("avx2 variants match the scalar reference") {
  const kernels::Backend* simd = kernels::avx2();
  if (!simd) return;  // host without AVX2
  const kernels::Backend& ref = kernels::scalar();
  Rng rng(99);

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(500);
    const auto a = random_floats(rng, n);
    const auto b = random_floats(rng, n);
    const auto c = random_floats(rng, n);
    const auto d = random_floats(rng, n);

    CHECK(simd->dot_f32(a.data(), b.data(), n) ==
          doctest::Approx(ref.dot_f32(a.data(), b.data(), n)).epsilon(1e-12));

    double s0[5], s1[5];
    ref.sums5_f32(a.data(), b.data(), n, s0);
    simd->sums5_f32(a.data(), b.data(), n, s1);
    for (int i = 0; i < 5; ++i) {
      CHECK(s1[i] == doctest::Approx(s0[i]).epsilon(1e-12));
    }

    double g0[3], g1[3];
    ref.grad_moments_f32(a.data(), b.data(), n, g0);
    simd->grad_moments_f32(a.data(), b.data(), n, g1);
    for (int i = 0; i < 3; ++i) {
      CHECK(g1[i] == doctest::Approx(g0[i]).epsilon(1e-12));
    }

    double r0[2], r1[2];
    ref.flow_rhs_f32(a.data(), b.data(), c.data(), d.data(), n, r0);
    simd->flow_rhs_f32(a.data(), b.data(), c.data(), d.data(), n, r1);
    for (int i = 0; i < 2; ++i) {
      CHECK(r1[i] == doctest::Approx(r0[i]).epsilon(1e-12));
    }
  }

  // doubles
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.index(400);
    std::vector<double> x(n), y(n), y2;
    for (auto& v : x) v = rng.uniform(-2.0, 2.0);
    for (auto& v : y) v = rng.uniform(-2.0, 2.0);
    y2 = y;
    CHECK(simd->dot_f64(x.data(), y.data(), n) ==
          doctest::Approx(ref.dot_f64(x.data(), y.data(), n)).epsilon(1e-13));
    const double alpha = rng.uniform(-1.0, 1.0);
    ref.axpy_f64(alpha, x.data(), y.data(), n);
    simd->axpy_f64(alpha, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(y2[i] == doctest::Approx(y[i]).epsilon(1e-14));
    }
  }

  // patch sampler, interior and border paths
  const int w = 64, h = 48;
  const auto img = random_floats(rng, std::size_t(w) * h, 0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const double cx = rng.uniform(-3.0, w + 3.0);
    const double cy = rng.uniform(-3.0, h + 3.0);
    const int win = trial % 2 == 0 ? 11 : 13;
    std::vector<float> p0(std::size_t(win) * win), p1(p0.size());
    ref.patch_bilinear_f32(img.data(), w, h, cx, cy, win, p0.data());
    simd->patch_bilinear_f32(img.data(), w, h, cx, cy, win, p1.data());
    for (std::size_t i = 0; i < p0.size(); ++i) {
      CHECK(p1[i] == doctest::Approx(p0[i]).epsilon(1e-5));
    }
  }

  // pyramid row kernels
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 5 + int(rng.index(200));
    std::vector<std::vector<float>> rows(5);
    const float* ptrs[5];
    for (int k = 0; k < 5; ++k) {
      rows[std::size_t(k)] = random_floats(rng, std::size_t(n));
      ptrs[k] = rows[std::size_t(k)].data();
    }
    const float wts[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16,
                          1.0f / 16};
    std::vector<float> d0(static_cast<std::size_t>(n)), d1(static_cast<std::size_t>(n));
    ref.row_mix5_f32(ptrs, wts, d0.data(), std::size_t(n));
    simd->row_mix5_f32(ptrs, wts, d1.data(), std::size_t(n));
    for (int i = 0; i < n; ++i) {
      CHECK(d1[std::size_t(i)] ==
            doctest::Approx(d0[std::size_t(i)]).epsilon(1e-6));
    }

    const int ow = (n + 1) / 2;
    std::vector<float> e0(static_cast<std::size_t>(ow)), e1(static_cast<std::size_t>(ow));
    ref.decimate5_f32(rows[0].data(), n, wts, e0.data(), ow);
    simd->decimate5_f32(rows[0].data(), n, wts, e1.data(), ow);
    for (int i = 0; i < ow; ++i) {
      CHECK(e1[std::size_t(i)] ==
            doctest::Approx(e0[std::size_t(i)]).epsilon(1e-6));
    }
  }
}

TEST_CASE("backend selection") {
  const auto names = kernels::available();
  CHECK(names.size() >= 1);
  CHECK(names[0] == "scalar");
  CHECK(kernels::select("scalar"));
  CHECK(std::string(kernels::active().name) == "scalar");
  CHECK_FALSE(kernels::select("no-such-backend"));
  CHECK(kernels::select("auto"));
  if (kernels::avx2()) {
    CHECK(std::string(kernels::active().name) == "avx2");
  }
}
