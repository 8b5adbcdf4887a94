#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "velo/geometry.hpp"
#include "velo/tracker.hpp"

namespace velo {

// Dense scalar grid (disparity, or one flow component). Resolution may
// differ from the video; boxes are rescaled proportionally at aggregation.
struct DenseMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major

  float cell(int x, int y) const {
    return values[std::size_t(y) * width + x];
  }
  // Bilinear between cell centers; (x, y) in cell units, clamped.
  double sample(double x, double y) const;
  bool valid() const;
};

struct FlowField {
  DenseMap u;
  DenseMap v;
};

enum class CueChannel { U, V, Depth };

struct CueSeries {
  CueChannel channel = CueChannel::Depth;
  std::vector<double> values;  // one per frame
};

struct FeatureConfig {
  int frame_skip = 5;
  double shrink_fraction = 0.1;
  int gaussian_taps = 5;  // odd
  double gaussian_sigma = 1.0;
  bool include_flow = false;
  bool include_depth = false;
  int image_width = 0;   // normalization constants
  int image_height = 0;

  bool valid() const;
};

inline constexpr int kFeatureLayoutVersion = 1;

// Layout, per sampled frame starting at the last and stepping back by
// frame_skip: [cx/W, cy/H, w/W, h/H], then [u, v] when flow is enabled, then
// [depth] when depth is enabled; finally the last-frame box area / (W*H).
struct FeatureVector {
  int layout_version = kFeatureLayoutVersion;
  std::vector<double> values;
};

// Middlebury .flo: float magic 202021.25, int32 width, int32 height, then
// h*w interleaved (u, v) float32 pairs, all little-endian.
FlowField load_flow_field(const std::filesystem::path& path);
void save_flow_field(const std::filesystem::path& path, const FlowField& f);

// Grayscale PFM ("Pf"), float32 rows stored bottom-up; returned top-down.
DenseMap load_disparity_map(const std::filesystem::path& path);
void save_disparity_map(const std::filesystem::path& path, const DenseMap& m);

// Mean of map cells whose centers fall inside the box after rescaling it to
// map resolution and shrinking it; center sample when no cell qualifies.
double aggregate_in_box(const DenseMap& m, const BoundingBox& b,
                        int video_width, int video_height,
                        double shrink_fraction);

// Normalized Gaussian convolution with edge replication; length-preserving.
std::vector<double> gaussian_smooth(const std::vector<double>& s, int taps,
                                    double sigma);
CueSeries gaussian_smooth(const CueSeries& s, int taps, double sigma);

std::size_t feature_length(const FeatureConfig& cfg, std::size_t frames);

FeatureVector assemble_features(const Track& track,
                                const std::vector<FlowField>* flow,
                                const std::vector<DenseMap>* depth,
                                const FeatureConfig& cfg);

}  // namespace velo
