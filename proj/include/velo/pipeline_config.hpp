#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "velo/cues.hpp"
#include "velo/ensemble.hpp"
#include "velo/regressor.hpp"
#include "velo/tracker.hpp"

namespace velo {

// One versioned JSON document driving every subcommand; command-line flags
// override individual fields. Unknown keys are rejected.
struct PipelineConfig {
  int version = 1;
  TrackerConfig tracker;
  FeatureConfig features;  // image dims filled in from the dataset
  TrainConfig train;
  std::optional<AreaSplitConfig> split;  // nullopt = "calibrate"
  std::string profile = "full";          // "full" | "ablation"
  std::string route_train = "bucketed";  // "bucketed" | "all"
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void save_pipeline_config(const std::filesystem::path& path,
                          const PipelineConfig& cfg);

}  // namespace velo
