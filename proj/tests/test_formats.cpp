#include "velo/dataset_io.hpp"

#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "velo/errors.hpp"
#include "velo/rng.hpp"
#include "test_util.hpp"

using namespace velo;

namespace {

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "velo_io_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("pgm round-trip preserves 8-bit data") {
  const auto dir = temp_dir();
  ImageFrame f = ImageFrame::filled(33, 17, 0.0f);
  Rng rng(6);
  for (float& v : f.intensity) {
    v = float(rng.index(256)) / 255.0f;  // already on the 8-bit lattice
  }
  save_pgm(dir / "a.pgm", f);
  const ImageFrame g = load_pgm(dir / "a.pgm");
  CHECK(g.width == f.width);
  CHECK(g.height == f.height);
  CHECK(g.intensity == f.intensity);

  // writers are idempotent byte-for-byte
  const std::string first = slurp(dir / "a.pgm");
  save_pgm(dir / "a.pgm", f);
  CHECK(slurp(dir / "a.pgm") == first);
}

TEST_CASE("png round-trip through the gray loader") {
  const auto dir = temp_dir();
  const int w = 21, h = 14;
  std::vector<unsigned char> rgb(std::size_t(w) * h * 3);
  Rng rng(8);
  for (auto& b : rgb) b = (unsigned char)(rng.index(256));
  save_png_rgb(dir / "a.png", w, h, rgb);
  const ImageFrame f = load_png(dir / "a.png");
  REQUIRE(f.width == w);
  REQUIRE(f.height == h);
  // spot-check the luma conversion
  const std::size_t i = 5 * std::size_t(w) + 7;
  const float expect = luma(rgb[i * 3] / 255.0f, rgb[i * 3 + 1] / 255.0f,
                            rgb[i * 3 + 2] / 255.0f);
  CHECK(f.intensity[i] == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("manifest round-trip") {
  const auto dir = temp_dir();
  SequenceManifest m;
  m.sequence_id = "seq0001";
  m.drive_id = "drive0";
  m.fps = 20.0;
  m.frame_files = {"frames/seq0001/f0000.pgm", "frames/seq0001/f0001.pgm"};
  VehicleAnnotation a;
  a.last_frame_box = {10.5, 20.25, 30.0, 40.0};
  a.velocity = {{1.25, -3.5}};
  a.position = {{2.0, 25.0}};
  m.annotations.push_back(a);
  VehicleAnnotation test_time;  // test data: null velocity/position
  test_time.last_frame_box = {1, 2, 3, 4};
  m.annotations.push_back(test_time);

  save_manifest(dir / "seq0001.manifest.json", m);
  const SequenceManifest r = load_manifest(dir / "seq0001.manifest.json");
  CHECK(r.sequence_id == m.sequence_id);
  CHECK(r.drive_id == m.drive_id);
  CHECK(r.fps == m.fps);
  CHECK(r.frame_files == m.frame_files);
  REQUIRE(r.annotations.size() == 2);
  CHECK(r.annotations[0].last_frame_box.x == 10.5);
  CHECK((*r.annotations[0].velocity)[1] == -3.5);
  CHECK((*r.annotations[0].position)[1] == 25.0);
  CHECK_FALSE(r.annotations[1].velocity.has_value());
  CHECK_FALSE(r.annotations[1].position.has_value());

  const auto found = find_manifests(dir);
  CHECK(found.size() >= 1);
}

TEST_CASE("track record round-trip") {
  const auto dir = temp_dir();
  TrackRecord rec;
  rec.sequence_id = "seqX";
  rec.vehicle_id = "seqX.v0";
  rec.track.boxes = {{1.5, 2.5, 3.5, 4.5}, {1.25, 2.25, 3.5, 4.5}};
  rec.track.source = {TrackSource::Fallback, TrackSource::MedianFlow};
  rec.track.clipped = {0, 0};
  save_track(dir / "t.json", rec);
  const TrackRecord r = load_track(dir / "t.json");
  CHECK(r.sequence_id == rec.sequence_id);
  CHECK(r.vehicle_id == rec.vehicle_id);
  REQUIRE(r.track.boxes.size() == 2);
  CHECK(r.track.boxes[0].x == 1.5);
  CHECK(r.track.boxes[1].y == 2.25);
  CHECK(r.track.source[0] == TrackSource::Fallback);
  CHECK(r.track.source[1] == TrackSource::MedianFlow);
}

TEST_CASE("feature records round-trip") {
  const auto dir = temp_dir();
  std::vector<FeatureRecord> recs(2);
  recs[0].vehicle_id = "a.v0";
  recs[0].features.values = {0.125, -2.0, 1e-9, 39.0};
  recs[1].vehicle_id = "b.v1";
  recs[1].features.values = {1.0 / 3.0};
  save_features(dir / "f.json", recs);
  const auto r = load_features(dir / "f.json");
  REQUIRE(r.size() == 2);
  CHECK(r[0].vehicle_id == "a.v0");
  CHECK(r[0].features.values == recs[0].features.values);  // bit-exact
  CHECK(r[1].features.values == recs[1].features.values);
  CHECK(r[0].features.layout_version == kFeatureLayoutVersion);
}

TEST_CASE("model json round-trip preserves predictions bit-exactly") {
  const auto dir = temp_dir();
  Rng rng(77);
  const MlpTopology topo{6, 2, 9, 4};
  MlpModel m;
  m.params = init_parameters(topo, rng);
  m.feat_mean.resize(6);
  m.feat_std.resize(6);
  for (auto& v : m.feat_mean) v = rng.uniform(-1, 1);
  for (auto& v : m.feat_std) v = rng.uniform(0.5, 2.0);
  m.meta.seed = 123456789;
  m.meta.best_epoch = 41;
  m.meta.val_mse = 0.012345678901234567;

  save_model(dir / "m.json", m);
  const MlpModel r = load_model(dir / "m.json");
  CHECK(r.meta.seed == m.meta.seed);
  CHECK(r.meta.best_epoch == m.meta.best_epoch);
  CHECK(r.meta.val_mse == m.meta.val_mse);

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(6);
    for (auto& v : x) v = rng.uniform(-2, 2);
    const auto a = predict(m, x);
    const auto b = predict(r, x);
    for (int i = 0; i < 4; ++i) {
      CHECK(a[std::size_t(i)] == b[std::size_t(i)]);  // bit-exact
    }
  }
}

TEST_CASE("ensemble manifest round-trip") {
  const auto dir = temp_dir() / "ens";
  std::filesystem::remove_all(dir);
  Rng rng(5);
  RangeEnsemble e;
  e.split = {4000.0, 600.0};
  e.profile = "full";
  for (const RangeClass range :
       {RangeClass::Near, RangeClass::Medium, RangeClass::Far}) {
    std::vector<MlpModel> models;
    for (int i = 0; i < 5; ++i) {
      MlpModel m;
      m.params = init_parameters(MlpTopology{3, 1, 4, 4}, rng);
      m.feat_mean = {0, 0, 0};
      m.feat_std = {1, 1, 1};
      models.push_back(std::move(m));
    }
    e.models[range] = std::move(models);
  }
  const auto manifest = save_ensemble(dir, e);
  const RangeEnsemble r = load_ensemble(manifest);
  CHECK(r.split.near_area_threshold == 4000.0);
  CHECK(r.split.far_area_threshold == 600.0);
  CHECK(r.profile == "full");
  REQUIRE(r.models.size() == 3);
  const std::vector<double> x = {0.5, -0.5, 1.0};
  const auto a = predict(e, x, 9000.0);
  const auto b = predict(r, x, 9000.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(a[std::size_t(i)] == b[std::size_t(i)]);
  }
}

TEST_CASE("predictions and report files") {
  const auto dir = temp_dir();
  std::vector<PredictionRecord> preds(2);
  preds[0] = {"a.v0", {1.5, -2.5}, {0.5, 20.0}};
  preds[1] = {"b.v0", {0.0, 0.25}, {-1.0, 50.0}};
  save_predictions(dir / "p.json", preds);
  const auto r = load_predictions(dir / "p.json");
  REQUIRE(r.size() == 2);
  CHECK(r[0].velocity[0] == 1.5);
  CHECK(r[1].position[1] == 50.0);

  EvaluationReport rep;
  rep.e_near = 0.12;
  rep.e_medium = 0.54;
  rep.e_far = 3.11;
  rep.e_v = challenge_score(0.12, 0.54, 3.11);
  rep.n_near = 10;
  rep.n_medium = 20;
  rep.n_far = 5;
  rep.rmse_overall = 1.1;
  save_report(dir / "r.json", rep);
  CHECK(slurp(dir / "r.json").find("1.2566") != std::string::npos);
  save_report_svg(dir / "r.svg", rep);
  CHECK(slurp(dir / "r.svg").find("<svg") != std::string::npos);
}

TEST_CASE("ground truth sidecar round-trip") {
  const auto dir = temp_dir();
  SyntheticGroundTruth gt;
  VehicleGroundTruth v;
  v.boxes = {{1, 2, 3, 4}, {1.5, 2.5, 3.5, 4.5}};
  v.velocity = {0.5, -4.0};
  v.position = {1.0, 30.0};
  v.distance = std::hypot(1.0, 30.0);
  gt.vehicles.push_back(v);
  save_ground_truth(dir / "gt.json", "seqZ", gt);
  const SyntheticGroundTruth r = load_ground_truth(dir / "gt.json");
  REQUIRE(r.vehicles.size() == 1);
  CHECK(r.vehicles[0].boxes[1].x == 1.5);
  CHECK(r.vehicles[0].velocity[1] == -4.0);
  CHECK(r.vehicles[0].distance == v.distance);
}

TEST_CASE("json writers are idempotent") {
  const auto dir = temp_dir();
  std::vector<FeatureRecord> recs(1);
  recs[0].vehicle_id = "x";
  recs[0].features.values = {0.1, 0.2, 0.3};
  save_features(dir / "idem.json", recs);
  const std::string first = slurp(dir / "idem.json");
  save_features(dir / "idem.json", recs);
  CHECK(slurp(dir / "idem.json") == first);
}
