#include "velo/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <doctest.h>

#include "velo/rng.hpp"

using namespace velo;

TEST_CASE("classify_range_by_area") {
  const AreaSplitConfig split{5000.0, 800.0};
  CHECK(classify_range_by_area(5000.0, split) == RangeClass::Near);
  CHECK(classify_range_by_area(5001.0, split) == RangeClass::Near);
  CHECK(classify_range_by_area(4999.0, split) == RangeClass::Medium);
  CHECK(classify_range_by_area(800.0, split) == RangeClass::Far);
  CHECK(classify_range_by_area(801.0, split) == RangeClass::Medium);
  CHECK(classify_range_by_area(1.0, split) == RangeClass::Far);
  CHECK_THROWS_AS(classify_range_by_area(0.0, split), std::invalid_argument);
  CHECK_THROWS_AS(classify_range_by_area(1.0, AreaSplitConfig{1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("larger area never maps to a farther class") {
  const AreaSplitConfig split{5000.0, 800.0};
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform(1.0, 10000.0);
    const double b = rng.uniform(1.0, 10000.0);
    const double lo = std::min(a, b), hi = std::max(a, b);
    CHECK(int(classify_range_by_area(hi, split)) <=
          int(classify_range_by_area(lo, split)));
  }
}

TEST_CASE("calibrate_area_thresholds") {
  SUBCASE("exact pinhole areas give the analytic optimum") {
    // area = k / d^2 with a fine distance grid across the boundaries
    const double k = 1.0e6;
    std::vector<RangeSample> samples;
    for (double d = 6.0; d <= 75.0; d += 0.05) {
      samples.push_back({k / (d * d), d});
    }
    const AreaSplitConfig split = calibrate_area_thresholds(samples);
    CHECK(count_range_disagreement(samples, split) == 0);
    CHECK(split.near_area_threshold ==
          doctest::Approx(k / (20.0 * 20.0)).epsilon(0.01));
    CHECK(split.far_area_threshold ==
          doctest::Approx(k / (45.0 * 45.0)).epsilon(0.01));
  }

  SUBCASE("a single-range dataset is rejected") {
    std::vector<RangeSample> samples;
    for (int i = 0; i < 40; ++i) samples.push_back({1000.0 + i, 30.0});
    CHECK_THROWS_AS(calibrate_area_thresholds(samples), std::invalid_argument);
  }

  SUBCASE("noisy areas: no scanned alternative beats the calibration") {
    Rng rng(17);
    std::vector<RangeSample> samples;
    for (int i = 0; i < 120; ++i) {
      const double d = rng.uniform(6.0, 75.0);
      const double noisy_area =
          1.0e6 / (d * d) * rng.uniform(0.8, 1.25);  // multiplicative noise
      samples.push_back({noisy_area, d});
    }
    const AreaSplitConfig split = calibrate_area_thresholds(samples);
    const std::size_t best = count_range_disagreement(samples, split);

    // brute-force re-scan over every observed pair
    std::vector<double> areas;
    for (const RangeSample& s : samples) areas.push_back(s.area);
    std::sort(areas.begin(), areas.end());
    for (const double far_thr : areas) {
      for (const double near_thr : areas) {
        if (!(near_thr > far_thr)) continue;
        CHECK(count_range_disagreement(samples, {near_thr, far_thr}) >= best);
      }
    }
  }
}

namespace {

DatasetSample sample_of(const std::string& drive, double area,
                        std::array<double, 4> targets = {0, 0, 0, 0}) {
  DatasetSample s;
  s.drive_id = drive;
  s.vehicle_id = drive + "_v";
  s.features = {area / 1000.0, 1.0};
  s.targets = targets;
  s.last_area = area;
  return s;
}

}  // namespace

TEST_CASE("partition_folds") {
  SUBCASE("10 single-drive samples split 2/2/2/2/2") {
    std::vector<DatasetSample> samples;
    for (int i = 0; i < 10; ++i) {
      samples.push_back(sample_of("drive" + std::to_string(i), 100.0 + i));
    }
    const auto folds = partition_folds(samples, 5, 9);
    REQUIRE(folds.size() == 5);
    for (const auto& f : folds) CHECK(f.size() == 2);
  }

  SUBCASE("11 samples: sizes differ by at most one") {
    std::vector<DatasetSample> samples;
    for (int i = 0; i < 11; ++i) {
      samples.push_back(sample_of("drive" + std::to_string(i), 100.0 + i));
    }
    const auto folds = partition_folds(samples, 5, 9);
    std::size_t lo = 99, hi = 0;
    for (const auto& f : folds) {
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    CHECK(hi - lo <= 1);
  }

  SUBCASE("samples sharing a drive always land in the same fold") {
    Rng rng(4);
    std::vector<DatasetSample> samples;
    for (int i = 0; i < 60; ++i) {
      samples.push_back(
          sample_of("drive" + std::to_string(rng.index(12)), 50.0 + i));
    }
    const auto folds = partition_folds(samples, 5, 31);
    std::map<std::string, std::size_t> drive_fold;
    std::set<std::size_t> seen;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      for (const std::size_t idx : folds[f]) {
        CHECK_FALSE(seen.count(idx));  // disjoint
        seen.insert(idx);
        const auto [it, fresh] =
            drive_fold.emplace(samples[idx].drive_id, f);
        if (!fresh) CHECK(it->second == f);
      }
    }
    CHECK(seen.size() == samples.size());  // covering
  }

  SUBCASE("fewer samples than folds is rejected") {
    std::vector<DatasetSample> samples = {sample_of("a", 10.0)};
    CHECK_THROWS_AS(partition_folds(samples, 5, 0), std::invalid_argument);
  }
}

namespace {

// targets depend affinely on the features so tiny nets learn them
std::vector<DatasetSample> three_range_dataset(int per_range,
                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DatasetSample> out;
  const double areas[3] = {8000.0, 2500.0, 300.0};
  for (int r = 0; r < 3; ++r) {
    for (int i = 0; i < per_range; ++i) {
      DatasetSample s;
      s.drive_id = "drive" + std::to_string(i % 10);
      s.vehicle_id = "v" + std::to_string(r) + "_" + std::to_string(i);
      const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
      s.features = {a, b};
      s.targets = {a + b, a - b, 2 * a, -b};
      s.last_area = areas[r] * rng.uniform(0.9, 1.1);
      out.push_back(std::move(s));
    }
  }
  return out;
}

EnsembleProfile tiny_profile() {
  EnsembleProfile p;
  p.name = "full";
  p.near_topo = p.medium_topo = p.far_topo = MlpTopology{0, 1, 8, 4};
  p.replicas_per_fold = 1;
  return p;
}

TrainConfig tiny_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 120;
  cfg.early_stop_patience = 60;
  cfg.dropout_rate = 0.0;
  cfg.weight_decay = 0.0;
  cfg.batch_size = 16;
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("train_ensemble") {
  const AreaSplitConfig split{5000.0, 800.0};

  SUBCASE("three populated ranges produce 3 x 5 models") {
    const auto data = three_range_dataset(25, 1);
    const RangeEnsemble e =
        train_ensemble(data, split, tiny_profile(), tiny_config(3));
    REQUIRE(e.models.size() == 3);
    for (const auto& [range, models] : e.models) {
      CHECK(models.size() == 5);
    }
    // the learned affine map is recovered well enough to route predictions
    const std::vector<double> x = {0.5, -0.25};
    const auto y = predict(e, x, 8000.0);
    CHECK(y[0] == doctest::Approx(0.25).epsilon(0.35));
  }

  SUBCASE("single-range data trains five models and leaves others absent") {
    auto data = three_range_dataset(25, 2);
    data.erase(std::remove_if(data.begin(), data.end(),
                              [&](const DatasetSample& s) {
                                return s.last_area < 5000.0;
                              }),
               data.end());
    const RangeEnsemble e =
        train_ensemble(data, split, tiny_profile(), tiny_config(3));
    CHECK(e.models.count(RangeClass::Near) == 1);
    CHECK(e.models.count(RangeClass::Medium) == 0);
    CHECK(e.models.count(RangeClass::Far) == 0);
    CHECK(e.models.at(RangeClass::Near).size() == 5);
    CHECK_THROWS_AS(predict(e, std::vector<double>{0.0, 0.0}, 300.0),
                    MissingModelError);
  }

  SUBCASE("same seed trains identical ensembles") {
    const auto data = three_range_dataset(12, 5);
    const RangeEnsemble a =
        train_ensemble(data, split, tiny_profile(), tiny_config(11));
    const RangeEnsemble b =
        train_ensemble(data, split, tiny_profile(), tiny_config(11));
    for (const auto& [range, models] : a.models) {
      const auto& other = b.models.at(range);
      REQUIRE(models.size() == other.size());
      for (std::size_t i = 0; i < models.size(); ++i) {
        CHECK(models[i].params.layers[0].w == other[i].params.layers[0].w);
        CHECK(models[i].meta.val_mse == other[i].meta.val_mse);
      }
    }
  }

  SUBCASE("drive-disjointness carries into every trained model") {
    // validated structurally: partition_folds enforces it, and training jobs
    // take train/val from disjoint folds of the same partition
    const auto data = three_range_dataset(15, 8);
    const auto folds = partition_folds(data, 5, 123);
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::set<std::string> val_drives;
      for (const std::size_t i : folds[f]) {
        val_drives.insert(data[i].drive_id);
      }
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g == f) continue;
        for (const std::size_t i : folds[g]) {
          CHECK_FALSE(val_drives.count(data[i].drive_id));
        }
      }
    }
  }
}

namespace {

MlpModel constant_model(std::array<double, 4> outputs, int input_dim) {
  MlpModel m;
  m.params.topo = MlpTopology{input_dim, 1, 2, 4};
  Rng rng(0);
  m.params = [&] {
    MlpParameters p = init_parameters(m.params.topo, rng);
    for (MlpLayer& l : p.layers) {
      std::fill(l.w.begin(), l.w.end(), 0.0);
      std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    p.layers.back().b = {outputs[0], outputs[1], outputs[2], outputs[3]};
    return p;
  }();
  m.feat_mean.assign(std::size_t(input_dim), 0.0);
  m.feat_std.assign(std::size_t(input_dim), 1.0);
  return m;
}

}  // namespace

TEST_CASE("predict") {
  RangeEnsemble e;
  e.split = {5000.0, 800.0};
  e.profile = "full";

  SUBCASE("five identical models equal the single-model output") {
    e.models[RangeClass::Near] =
        std::vector<MlpModel>(5, constant_model({1.5, -2.0, 3.0, 0.5}, 2));
    const auto y = predict(e, std::vector<double>{0.1, 0.2}, 9000.0);
    CHECK(y[0] == doctest::Approx(1.5));
    CHECK(y[1] == doctest::Approx(-2.0));
  }

  SUBCASE("the mean of {1..5} is 3, in any fold order") {
    std::vector<MlpModel> models;
    for (int i = 1; i <= 5; ++i) {
      models.push_back(constant_model({double(i), 0, 0, 0}, 2));
    }
    e.models[RangeClass::Medium] = models;
    const std::vector<double> x = {0.0, 0.0};
    const auto y = predict(e, x, 2000.0);
    CHECK(y[0] == doctest::Approx(3.0));

    std::reverse(models.begin(), models.end());
    std::swap(models[1], models[3]);
    e.models[RangeClass::Medium] = models;
    const auto y2 = predict(e, x, 2000.0);
    CHECK(y2[0] == doctest::Approx(y[0]).epsilon(1e-15));
  }

  SUBCASE("routing never touches other buckets") {
    e.models[RangeClass::Near] =
        std::vector<MlpModel>(5, constant_model({10, 0, 0, 0}, 1));
    e.models[RangeClass::Medium] =
        std::vector<MlpModel>(5, constant_model({20, 0, 0, 0}, 1));
    e.models[RangeClass::Far] =
        std::vector<MlpModel>(5, constant_model({30, 0, 0, 0}, 1));
    const std::vector<double> x = {0.0};
    CHECK(predict(e, x, 5000.0)[0] == doctest::Approx(10.0));  // boundary: Near
    CHECK(predict(e, x, 4999.0)[0] == doctest::Approx(20.0));
    CHECK(predict(e, x, 800.0)[0] == doctest::Approx(30.0));   // boundary: Far
    CHECK(predict(e, x, 801.0)[0] == doctest::Approx(20.0));
  }
}
