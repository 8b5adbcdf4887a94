#include "velo/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "velo/ensemble.hpp"
#include "velo/rng.hpp"

namespace velo {

namespace {

float bench_pattern(double x, double y) {
  const double v = std::sin(0.21 * x + 1.1) * std::cos(0.17 * y) +
                   0.7 * std::sin(0.073 * x - 0.049 * y) +
                   0.5 * std::cos(0.031 * x + 0.011 * y + 0.7);
  return float(0.5 + 0.2 * v);
}

ImageFrame bench_frame(int w, int h, double shift) {
  ImageFrame f = ImageFrame::filled(w, h, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.px(x, y) = bench_pattern(x - shift, y - 0.4 * shift);
    }
  }
  return f;
}

}  // namespace

TrackBenchResult bench_median_flow(int width, int height, int steps,
                                   const TrackerConfig& cfg) {
  using clock = std::chrono::steady_clock;

  // a small cycle of drifting frames keeps LK iterating realistically
  constexpr int kVariants = 8;
  std::vector<ImageFrame> frames;
  frames.reserve(kVariants);
  for (int i = 0; i < kVariants; ++i) {
    frames.push_back(bench_frame(width, height, 1.8 * i));
  }

  BoundingBox box{width * 0.5 - 100.0, height * 0.5 - 75.0, 200.0, 150.0};

  ImagePyramid cur = build_pyramid(frames[0], cfg.pyramid_levels);
  std::vector<double> times_ms;
  times_ms.reserve(std::size_t(steps));
  double mean = 0.0;
  for (int s = 0; s < steps; ++s) {
    const ImageFrame& incoming = frames[std::size_t((s + 1) % kVariants)];
    const auto t0 = clock::now();
    ImagePyramid next = build_pyramid(incoming, cfg.pyramid_levels);
    const MedianFlowResult r = median_flow_step(cur, next, box, cfg);
    const auto t1 = clock::now();
    const double ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    times_ms.push_back(ms);
    mean += ms;
    if (const BoundingBox* nb = std::get_if<BoundingBox>(&r)) box = *nb;
    cur = std::move(next);
  }

  TrackBenchResult out;
  out.steps = steps;
  out.width = width;
  out.height = height;
  out.mean_ms = mean / double(steps);
  std::sort(times_ms.begin(), times_ms.end());
  out.median_ms = times_ms[times_ms.size() / 2];
  return out;
}

MlpBenchResult bench_mlp_inference(const MlpTopology& topo, int models,
                                   int reps) {
  using clock = std::chrono::steady_clock;
  Rng rng(4242);

  RangeEnsemble e;
  e.split = {2.0, 1.0};
  std::vector<MlpModel> bucket;
  for (int m = 0; m < models; ++m) {
    MlpModel model;
    model.params = init_parameters(topo, rng);
    model.feat_mean.resize(std::size_t(topo.input_dim));
    model.feat_std.assign(std::size_t(topo.input_dim), 1.0);
    for (auto& v : model.feat_mean) v = rng.uniform(-0.5, 0.5);
    bucket.push_back(std::move(model));
  }
  e.models[RangeClass::Near] = std::move(bucket);

  std::vector<double> x(std::size_t(topo.input_dim));
  for (auto& v : x) v = rng.uniform(-1, 1);

  // warm-up
  volatile double sink = predict(e, x, 10.0)[0];

  const auto t0 = clock::now();
  for (int r = 0; r < reps; ++r) {
    const auto y = predict(e, x, 10.0);
    sink = sink + y[0];
  }
  const auto t1 = clock::now();
  (void)sink;

  MlpBenchResult out;
  out.reps = reps;
  out.models = models;
  out.per_vehicle_us =
      std::chrono::duration<double, std::micro>(t1 - t0).count() / reps;
  return out;
}

}  // namespace velo
