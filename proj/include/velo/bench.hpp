#pragma once

#include "velo/regressor.hpp"
#include "velo/tracker.hpp"

namespace velo {

struct TrackBenchResult {
  double median_ms = 0.0;
  double mean_ms = 0.0;
  int steps = 0;
  int width = 0;
  int height = 0;
};

// Per-frame Median-Flow cost on a drifting synthetic scene: each timed step
// builds the incoming frame's pyramid and runs one median_flow_step.
TrackBenchResult bench_median_flow(int width, int height, int steps,
                                   const TrackerConfig& cfg);

struct MlpBenchResult {
  double per_vehicle_us = 0.0;
  int reps = 0;
  int models = 0;
};

// Ensemble inference cost: standardize + forward through `models` networks
// of the given topology and average.
MlpBenchResult bench_mlp_inference(const MlpTopology& topo, int models,
                                   int reps);

}  // namespace velo
