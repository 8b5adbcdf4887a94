#include "velo/synthcam.hpp"

#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "velo/geometry.hpp"
#include "velo/rng.hpp"

using namespace velo;

TEST_CASE("project_vehicle pinhole arithmetic") {
  const CameraIntrinsics k{1000.0, 640.0, 360.0};

  const BoundingBox b = project_vehicle(0.0, 20.0, 2.0, 1.5, k);
  CHECK(b.w == doctest::Approx(100.0));
  CHECK(b.cx() == doctest::Approx(640.0));
  CHECK(b.cy() == doctest::Approx(360.0));

  const BoundingBox far = project_vehicle(0.0, 40.0, 2.0, 1.5, k);
  CHECK(far.w == doctest::Approx(b.w / 2.0));
  CHECK(far.h == doctest::Approx(b.h / 2.0));

  const BoundingBox off = project_vehicle(1.0, 20.0, 2.0, 1.5, k);
  CHECK(off.cx() == doctest::Approx(640.0 + 50.0));

  CHECK_THROWS_AS(project_vehicle(0.0, 0.0, 2.0, 1.5, k),
                  std::invalid_argument);
  CHECK_THROWS_AS(project_vehicle(0.0, -5.0, 2.0, 1.5, k),
                  std::invalid_argument);
}

TEST_CASE("render_sequence ground truth") {
  SceneSpec spec = SceneSpec::with_defaults(320, 180, 300.0);
  spec.frame_count = 40;
  spec.seed = 21;

  SUBCASE("zero relative velocity keeps every box identical") {
    spec.vehicles.push_back({0.0, 25.0, 0.0, 0.0, 1.8, 1.4, 5});
    const auto [seq, gt] = render_sequence(spec);
    REQUIRE(gt.vehicles.size() == 1);
    const auto& boxes = gt.vehicles[0].boxes;
    REQUIRE(boxes.size() == 40);
    for (const BoundingBox& b : boxes) {
      CHECK(b.x == boxes[0].x);
      CHECK(b.w == boxes[0].w);
    }
  }

  SUBCASE("approach kinematics follow the pinhole relation") {
    // z0 = 30, vz = -5: last frame z = 30 - 5 * (39/20) = 20.25
    spec.vehicles.push_back({0.0, 30.0, 0.0, -5.0, 1.8, 1.4, 5});
    const auto [seq, gt] = render_sequence(spec);
    const VehicleGroundTruth& v = gt.vehicles[0];
    CHECK(v.position[1] == doctest::Approx(20.25).epsilon(1e-12));
    CHECK(v.boxes.back().w ==
          doctest::Approx(300.0 * 1.8 / 20.25).epsilon(1e-12));
    CHECK(v.velocity[1] == doctest::Approx(-5.0));
  }

  SUBCASE("same seed renders bit-identical frames") {
    spec.vehicles.push_back({0.5, 22.0, 0.4, -2.0, 1.8, 1.4, 9});
    const auto [a, ga] = render_sequence(spec);
    const auto [b, gb] = render_sequence(spec);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
      CHECK(a.frames[t].intensity == b.frames[t].intensity);
    }
  }

  SUBCASE("vehicle crossing z = 0 is rejected up front") {
    spec.vehicles.push_back({0.0, 5.0, 0.0, -4.0, 1.8, 1.4, 5});
    CHECK_THROWS_AS(render_sequence(spec), std::invalid_argument);
  }
}

TEST_CASE("projection consistency: area * z^2 / (f^2 W H) = 1") {
  SceneSpec spec = SceneSpec::with_defaults(640, 360, 600.0);
  spec.vehicles.push_back({0.3, 28.0, 0.6, -3.5, 1.75, 1.45, 3});
  spec.seed = 8;
  const auto [seq, gt] = render_sequence(spec);
  const VehicleSpec& v = spec.vehicles[0];
  for (int t = 0; t < spec.frame_count; ++t) {
    const double z = v.z0 + v.vz * (t / spec.fps);
    const BoundingBox& b = gt.vehicles[0].boxes[std::size_t(t)];
    const double ratio = (b.w * b.h) * z * z /
                         (600.0 * 600.0 * v.width * v.height);
    CHECK(ratio == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ground-truth velocity equals the position finite difference") {
  SceneSpec spec = SceneSpec::with_defaults(640, 360, 600.0);
  spec.vehicles.push_back({-0.4, 35.0, 0.8, 2.5, 1.8, 1.4, 12});
  spec.seed = 3;
  const auto [seq, gt] = render_sequence(spec);
  const VehicleSpec& v = spec.vehicles[0];
  // constant velocity: fps * (p(t) - p(t-1)) is exact
  const double t1 = (spec.frame_count - 1) / spec.fps;
  const double t0 = (spec.frame_count - 2) / spec.fps;
  const double fd_x = ((v.x0 + v.vx * t1) - (v.x0 + v.vx * t0)) * spec.fps;
  const double fd_z = ((v.z0 + v.vz * t1) - (v.z0 + v.vz * t0)) * spec.fps;
  CHECK(gt.vehicles[0].velocity[0] == doctest::Approx(fd_x).epsilon(1e-9));
  CHECK(gt.vehicles[0].velocity[1] == doctest::Approx(fd_z).epsilon(1e-9));
}

TEST_CASE("rendered vehicle keeps the contrast floor") {
  SceneSpec spec = SceneSpec::with_defaults(640, 360, 600.0);
  spec.vehicles.push_back({0.0, 18.0, 0.0, 0.0, 1.8, 1.4, 77});
  spec.seed = 5;
  const auto [seq, gt] = render_sequence(spec);
  const ImageFrame& f = seq.frames.back();
  const BoundingBox& b = gt.vehicles[0].boxes.back();
  double inside = 0.0, outside = 0.0;
  std::int64_t nin = 0, nout = 0;
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const bool in = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
      (in ? inside : outside) += f.px(x, y);
      (in ? nin : nout) += 1;
    }
  }
  CHECK(std::abs(inside / double(nin) - outside / double(nout)) >= 0.2);
}

TEST_CASE("distance profile proportions hold over many draws") {
  const DistanceProfile profile;
  int counts[3] = {0, 0, 0};
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    const SceneSpec spec = sample_scene_spec(profile, 640, 360, 600.0, 2024,
                                             std::uint64_t(i), "s", "d");
    const VehicleSpec& v = spec.vehicles.at(0);
    const double t_last = (spec.frame_count - 1) / spec.fps;
    const double x = v.x0 + v.vx * t_last;
    const double z = v.z0 + v.vz * t_last;
    counts[std::size_t(classify_range_by_distance(std::hypot(x, z)))] += 1;
  }
  CHECK(counts[0] / double(n) == doctest::Approx(0.12).epsilon(0.45));
  CHECK(counts[1] / double(n) == doctest::Approx(0.65).epsilon(0.12));
  CHECK(counts[2] / double(n) == doctest::Approx(0.23).epsilon(0.30));
}

TEST_CASE("scene draws stay inside the frame with margin") {
  const DistanceProfile profile;
  for (int i = 0; i < 60; ++i) {
    const SceneSpec spec = sample_scene_spec(profile, 640, 360, 600.0, 77,
                                             std::uint64_t(i), "s", "d");
    const auto [seq, gt] = render_sequence(spec);
    for (const BoundingBox& b : gt.vehicles[0].boxes) {
      CHECK(b.x >= 0.0);
      CHECK(b.y >= 0.0);
      CHECK(b.x + b.w <= 640.0);
      CHECK(b.y + b.h <= 360.0);
    }
  }
}
