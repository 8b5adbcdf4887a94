#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "velo/geometry.hpp"
#include "velo/regressor.hpp"

namespace velo {

// Last-frame box-area thresholds, full-resolution pixels^2. Bigger boxes are
// nearer: area >= near routes Near, area <= far routes Far.
struct AreaSplitConfig {
  double near_area_threshold = 0.0;
  double far_area_threshold = 0.0;

  bool valid() const {
    return near_area_threshold > far_area_threshold &&
           far_area_threshold > 0.0;
  }
};

RangeClass classify_range_by_area(double area, const AreaSplitConfig& split);

struct RangeSample {
  double area = 0.0;      // last-frame box area
  double distance = 0.0;  // ground-truth distance
};

// Count of samples whose area routing disagrees with their distance class.
// This brute-force count is the definition calibrate_area_thresholds
// minimizes; tests re-scan with it.
std::size_t count_range_disagreement(std::span<const RangeSample> samples,
                                     const AreaSplitConfig& split);

// Exhaustive scan over candidate thresholds at observed area values,
// minimizing disagreement; ties break toward the larger thresholds.
AreaSplitConfig calibrate_area_thresholds(std::span<const RangeSample> samples);

// One vehicle ready for training or prediction.
struct DatasetSample {
  std::string vehicle_id;
  std::string drive_id;
  std::vector<double> features;
  std::array<double, 4> targets{};  // (vx, vy, px, py)
  double last_area = 0.0;
};

// Deterministic near-equal partition into k folds; all samples sharing a
// drive_id land in the same fold.
std::vector<std::vector<std::size_t>> partition_folds(
    std::span<const DatasetSample> samples, int k, std::uint64_t seed);

struct EnsembleProfile {
  std::string name;  // "full" | "ablation"
  MlpTopology near_topo;
  MlpTopology medium_topo;
  MlpTopology far_topo;
  int replicas_per_fold = 1;  // best-of-n by validation velocity MSE

  static EnsembleProfile full();
  static EnsembleProfile ablation();
  const MlpTopology& topology_for(RangeClass c) const;
};

enum class RouteTrain { Bucketed, All };

struct RangeEnsemble {
  AreaSplitConfig split;
  std::map<RangeClass, std::vector<MlpModel>> models;
  std::string profile = "full";
};

struct MissingModelError : std::runtime_error {
  explicit MissingModelError(RangeClass c)
      : std::runtime_error(std::string("no models for range ") + to_string(c)),
        range(c) {}
  RangeClass range;
};

// Routes by area, trains folds models per populated range (each validating
// on one fold), keeps each fold's best parameters.
RangeEnsemble train_ensemble(const std::vector<DatasetSample>& dataset,
                             const AreaSplitConfig& split,
                             const EnsembleProfile& profile,
                             const TrainConfig& cfg,
                             RouteTrain route = RouteTrain::Bucketed,
                             int folds = 5, int jobs = 1);

// Component-wise mean of the routed range's fold-model outputs.
std::array<double, 4> predict(const RangeEnsemble& e,
                              std::span<const double> features,
                              double last_frame_area);

}  // namespace velo
