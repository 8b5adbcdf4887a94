#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "velo/cues.hpp"
#include "velo/ensemble.hpp"
#include "velo/evaluation.hpp"
#include "velo/geometry.hpp"
#include "velo/regressor.hpp"
#include "velo/synthcam.hpp"
#include "velo/tracker.hpp"

namespace velo {

// --- frames ---------------------------------------------------------------

ImageFrame load_pgm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const ImageFrame& frame);

// 8-bit grayscale or RGB(A); color collapses through the fixed luma.
ImageFrame load_png(const std::filesystem::path& path);
// interleaved 8-bit RGB
void save_png_rgb(const std::filesystem::path& path, int width, int height,
                  const std::vector<unsigned char>& rgb);

// by extension: .pgm or .png
ImageFrame load_frame(const std::filesystem::path& path);

// --- dataset manifests ------------------------------------------------------

struct SequenceManifest {
  std::string sequence_id;
  std::string drive_id;
  double fps = 20.0;
  std::vector<std::string> frame_files;  // relative to the manifest directory
  std::vector<VehicleAnnotation> annotations;
};

SequenceManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path,
                   const SequenceManifest& m);

// *.manifest.json under dir, sorted by filename
std::vector<std::filesystem::path> find_manifests(
    const std::filesystem::path& dir);

VideoSequence load_sequence(const SequenceManifest& m,
                            const std::filesystem::path& manifest_dir);

// --- synthetic ground-truth sidecars ----------------------------------------

void save_ground_truth(const std::filesystem::path& path,
                       const std::string& sequence_id,
                       const SyntheticGroundTruth& gt);
SyntheticGroundTruth load_ground_truth(const std::filesystem::path& path);

// --- tracks -----------------------------------------------------------------

struct TrackRecord {
  std::string sequence_id;
  std::string vehicle_id;
  Track track;
};

void save_track(const std::filesystem::path& path, const TrackRecord& rec);
TrackRecord load_track(const std::filesystem::path& path);

// --- features ----------------------------------------------------------------

struct FeatureRecord {
  std::string vehicle_id;
  FeatureVector features;
};

void save_features(const std::filesystem::path& path,
                   const std::vector<FeatureRecord>& recs);
std::vector<FeatureRecord> load_features(const std::filesystem::path& path);

// --- models ------------------------------------------------------------------

void save_model(const std::filesystem::path& path, const MlpModel& model,
                int layout_version = kFeatureLayoutVersion);
MlpModel load_model(const std::filesystem::path& path);

// Writes the fold models plus an ensemble manifest into dir; returns the
// manifest path.
std::filesystem::path save_ensemble(const std::filesystem::path& dir,
                                    const RangeEnsemble& ensemble);
RangeEnsemble load_ensemble(const std::filesystem::path& manifest_path);

// --- predictions & reports -----------------------------------------------------

struct PredictionRecord {
  std::string vehicle_id;
  std::array<double, 2> velocity{};
  std::array<double, 2> position{};
};

void save_predictions(const std::filesystem::path& path,
                      const std::vector<PredictionRecord>& recs);
std::vector<PredictionRecord> load_predictions(
    const std::filesystem::path& path);

void save_report(const std::filesystem::path& path,
                 const EvaluationReport& report);

void save_report_svg(const std::filesystem::path& path,
                     const EvaluationReport& report);

std::string vehicle_id_of(const std::string& sequence_id, std::size_t index);

}  // namespace velo
