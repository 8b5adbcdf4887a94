#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "velo/geometry.hpp"

namespace velo {

// Downsampling chain for pyramidal LK. Level 0 is the input frame; each
// further level halves the dimensions (ceil) after a 5-tap binomial smooth.
struct ImagePyramid {
  std::vector<ImageFrame> levels;
};

struct PointTrack {
  double start_x = 0.0, start_y = 0.0;
  double forward_x = 0.0, forward_y = 0.0;
  double backward_x = 0.0, backward_y = 0.0;
  double fb_error = 0.0;  // +inf when not converged
  double ncc = 0.0;       // in [-1, 1]
  bool converged = false;
};

struct TrackerConfig {
  int grid = 10;                      // grid x grid points per box
  int pyramid_levels = 3;
  int lk_window = 11;                 // odd
  int lk_max_iterations = 20;
  double lk_epsilon = 0.01;           // pixels
  double keep_fraction = 0.5;         // in (0, 1]
  double failure_fb_threshold = 10.0; // pixels
  int ncc_search_radius = 16;         // pixels

  bool valid() const;
};

enum class TrackSource : std::uint8_t { MedianFlow, Fallback };

struct Track {
  std::vector<BoundingBox> boxes;       // one per frame, last == annotation
  std::vector<TrackSource> source;      // how each frame's box was produced
  std::vector<std::uint8_t> clipped;    // fallback diagnostics, non-normative
};

struct MedianFlowFailure {};

using MedianFlowResult = std::variant<BoundingBox, MedianFlowFailure>;

struct NccStepResult {
  BoundingBox box;
  bool clipped = false;  // search hit its border or the template left the image
};

ImagePyramid build_pyramid(const ImageFrame& frame, int levels);

struct LkResult {
  double x = 0.0, y = 0.0;
  bool converged = false;
};

// Coarse-to-fine iterative displacement estimate of point p from prev to
// next. Not converged when the 2x2 gradient system is degenerate or the
// point leaves the image.
LkResult lk_track_point(const ImagePyramid& prev, const ImagePyramid& next,
                        double px, double py, const TrackerConfig& cfg);

MedianFlowResult median_flow_step(const ImageFrame& prev,
                                  const ImageFrame& next,
                                  const BoundingBox& b,
                                  const TrackerConfig& cfg);

// Pyramid-reusing variant for sequential tracking and benchmarks.
MedianFlowResult median_flow_step(const ImagePyramid& prev,
                                  const ImagePyramid& next,
                                  const BoundingBox& b,
                                  const TrackerConfig& cfg);

// Exhaustive NCC search of the prev-frame template over +-ncc_search_radius.
// Never rescales the box.
NccStepResult ncc_fallback_step(const ImageFrame& prev, const ImageFrame& next,
                                const BoundingBox& b, const TrackerConfig& cfg);

// Track backwards from the last frame whose box is given by the annotation.
// Median Flow per frame pair; NCC fallback on failure.
Track track_vehicle(const VideoSequence& seq, const BoundingBox& last_box,
                    const TrackerConfig& cfg);

// Exposed for the forward-backward plumbing and tests: per-point diagnostics
// of one Median Flow step.
std::vector<PointTrack> median_flow_points(const ImagePyramid& prev,
                                           const ImagePyramid& next,
                                           const BoundingBox& b,
                                           const TrackerConfig& cfg);

}  // namespace velo
