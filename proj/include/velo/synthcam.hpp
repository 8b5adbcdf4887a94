#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "velo/geometry.hpp"

namespace velo {

struct CameraIntrinsics {
  double f = 600.0;   // focal length, pixels
  double cx = 0.0;    // principal point
  double cy = 0.0;
};

// One billboard vehicle on a constant-velocity 3-D path. Positions are at
// frame 0; lateral x, longitudinal z, metres and m/s relative to the camera.
struct VehicleSpec {
  double x0 = 0.0;
  double z0 = 30.0;
  double vx = 0.0;
  double vz = 0.0;
  double width = 1.8;   // physical metres
  double height = 1.4;
  std::uint64_t texture_seed = 0;
};

// Constant-intensity rectangle drawn over a vehicle for [start, end) frames.
struct OccluderSpec {
  int vehicle = 0;
  int start_frame = 0;
  int end_frame = 0;
  double margin_px = 8.0;
  float intensity = 0.5f;
};

struct SceneSpec {
  int image_width = 1280;
  int image_height = 720;
  double fps = 20.0;
  int frame_count = 40;
  std::uint64_t seed = 0;  // background texture
  CameraIntrinsics intrinsics;
  std::vector<VehicleSpec> vehicles;
  std::optional<OccluderSpec> occluder;
  // global background translation, px/frame (crude ego-motion; parallax is
  // out of scope)
  double bg_drift_x = 0.0;
  double bg_drift_y = 0.0;
  std::string sequence_id = "seq";
  std::string drive_id = "drive";

  // principal point defaulted to the image center
  static SceneSpec with_defaults(int w, int h, double focal);
};

struct VehicleGroundTruth {
  std::vector<BoundingBox> boxes;       // per frame, unclamped
  std::array<double, 2> velocity{};     // (vx, vy) = (lateral, longitudinal)
  std::array<double, 2> position{};     // last-frame (x, z)
  double distance = 0.0;                // |position|
};

struct SyntheticGroundTruth {
  std::vector<VehicleGroundTruth> vehicles;
};

// Pinhole projection of a W x H metre billboard centred laterally at x,
// longitudinally at z (z > 0), vertical centre on the optical axis.
BoundingBox project_vehicle(double x, double z, double width, double height,
                            const CameraIntrinsics& k);

// Procedural textured frames plus exact ground truth; deterministic per
// spec. Frames are quantized to 8-bit levels so in-memory sequences match
// PGM round trips bit-exactly.
std::pair<VideoSequence, SyntheticGroundTruth> render_sequence(
    const SceneSpec& spec);

struct DistanceProfile {
  double p_near = 0.12;
  double p_medium = 0.65;
  double p_far = 0.23;
  double near_min = 7.0, near_max = 20.0;
  double medium_min = 20.0, medium_max = 45.0;
  double far_min = 45.0, far_max = 75.0;
};

// Deterministic single-vehicle scene draw for sequence `index`.
SceneSpec sample_scene_spec(const DistanceProfile& profile, int image_width,
                            int image_height, double focal, std::uint64_t seed,
                            std::uint64_t index, const std::string& sequence_id,
                            const std::string& drive_id);

// Writes frames (PGM), per-sequence manifests and ground-truth sidecars.
void generate_dataset(int n_sequences, const DistanceProfile& profile,
                      std::uint64_t seed,
                      const std::filesystem::path& out_dir, int jobs = 1);

}  // namespace velo
