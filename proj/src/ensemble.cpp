#include "velo/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "velo/parallel.hpp"
#include "velo/rng.hpp"

namespace velo {

RangeClass classify_range_by_area(double area, const AreaSplitConfig& split) {
  if (!(area > 0.0)) {
    throw std::invalid_argument("classify_range_by_area: area must be > 0");
  }
  if (!split.valid()) {
    throw std::invalid_argument("classify_range_by_area: bad split config");
  }
  if (area >= split.near_area_threshold) return RangeClass::Near;
  if (area <= split.far_area_threshold) return RangeClass::Far;
  return RangeClass::Medium;
}

std::size_t count_range_disagreement(std::span<const RangeSample> samples,
                                     const AreaSplitConfig& split) {
  std::size_t bad = 0;
  for (const RangeSample& s : samples) {
    if (classify_range_by_area(s.area, split) !=
        classify_range_by_distance(s.distance)) {
      ++bad;
    }
  }
  return bad;
}

AreaSplitConfig calibrate_area_thresholds(
    std::span<const RangeSample> samples) {
  std::size_t counts[3] = {0, 0, 0};
  for (const RangeSample& s : samples) {
    counts[std::size_t(classify_range_by_distance(s.distance))] += 1;
  }
  if (counts[0] < 10 || counts[1] < 10 || counts[2] < 10) {
    throw std::invalid_argument(
        "calibrate_area_thresholds: need >= 10 samples per range class");
  }

  struct Row {
    double area;
    RangeClass truth;
  };
  std::vector<Row> rows(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rows[i] = {samples[i].area,
               classify_range_by_distance(samples[i].distance)};
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.area > b.area; });
  const std::size_t n = rows.size();

  // prefix[c][i] = count of truth class c among the i largest areas
  std::vector<std::array<std::size_t, 3>> prefix(n + 1, {0, 0, 0});
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i];
    prefix[i + 1][std::size_t(rows[i].truth)] += 1;
  }

  // prefix boundaries must not split equal areas: area >= threshold keeps
  // every duplicate of the boundary value together
  std::vector<std::size_t> cuts;  // usable prefix lengths
  cuts.push_back(0);
  for (std::size_t i = 1; i <= n; ++i) {
    if (i == n || rows[i].area != rows[i - 1].area) cuts.push_back(i);
  }

  const double hi_sentinel = rows.front().area * 2.0 + 1.0;
  const double lo_sentinel = rows.back().area * 0.5;

  std::size_t best_bad = std::numeric_limits<std::size_t>::max();
  AreaSplitConfig best{};
  for (const std::size_t i : cuts) {
    const double near_thr = i == 0 ? hi_sentinel : rows[i - 1].area;
    for (const std::size_t j : cuts) {
      if (j < i) continue;
      const double far_thr = j == n ? lo_sentinel : rows[j].area;
      if (!(near_thr > far_thr)) continue;
      const std::size_t correct =
          prefix[i][0] +                                    // Near in prefix
          (prefix[j][1] - prefix[i][1]) +                   // Medium between
          (prefix[n][2] - prefix[j][2]);                    // Far in suffix
      const std::size_t bad = n - correct;
      const bool better =
          bad < best_bad ||
          (bad == best_bad &&
           (near_thr > best.near_area_threshold ||
            (near_thr == best.near_area_threshold &&
             far_thr > best.far_area_threshold)));
      if (better) {
        best_bad = bad;
        best = {near_thr, far_thr};
      }
    }
  }
  return best;
}

std::vector<std::vector<std::size_t>> partition_folds(
    std::span<const DatasetSample> samples, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("partition_folds: k must be >= 1");
  if (samples.size() < std::size_t(k)) {
    throw std::invalid_argument("partition_folds: fewer samples than folds");
  }
  std::map<std::string, std::vector<std::size_t>> by_drive;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    by_drive[samples[i].drive_id].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> groups;
  groups.reserve(by_drive.size());
  for (const auto& [id, idx] : by_drive) groups.push_back(&idx);

  Rng rng(mix_seed(seed, 0x0f1dull));
  rng.shuffle(groups);

  // greedy: each drive goes to the currently smallest fold
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (const auto* g : groups) {
    std::size_t target = 0;
    for (std::size_t f = 1; f < folds.size(); ++f) {
      if (folds[f].size() < folds[target].size()) target = f;
    }
    folds[target].insert(folds[target].end(), g->begin(), g->end());
  }
  return folds;
}

EnsembleProfile EnsembleProfile::full() {
  EnsembleProfile p;
  p.name = "full";
  p.near_topo = {0, 3, 40, 4};
  p.medium_topo = {0, 4, 60, 4};
  p.far_topo = {0, 4, 70, 4};
  p.replicas_per_fold = 1;
  return p;
}

EnsembleProfile EnsembleProfile::ablation() {
  EnsembleProfile p;
  p.name = "ablation";
  p.near_topo = p.medium_topo = p.far_topo = {0, 3, 40, 4};
  p.replicas_per_fold = 10;
  return p;
}

const MlpTopology& EnsembleProfile::topology_for(RangeClass c) const {
  switch (c) {
    case RangeClass::Near:
      return near_topo;
    case RangeClass::Medium:
      return medium_topo;
    case RangeClass::Far:
    default:
      return far_topo;
  }
}

namespace {

std::vector<Sample> collect(const std::vector<DatasetSample>& dataset,
                            const std::vector<std::size_t>& idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (const std::size_t i : idx) {
    out.push_back({dataset[i].features, dataset[i].targets});
  }
  return out;
}

}  // namespace

RangeEnsemble train_ensemble(const std::vector<DatasetSample>& dataset,
                             const AreaSplitConfig& split,
                             const EnsembleProfile& profile,
                             const TrainConfig& cfg, RouteTrain route,
                             int folds, int jobs) {
  if (dataset.empty()) {
    throw std::invalid_argument("train_ensemble: empty dataset");
  }
  if (!split.valid()) {
    throw std::invalid_argument("train_ensemble: bad split config");
  }

  const int dim = int(dataset.front().features.size());
  std::array<std::vector<std::size_t>, 3> buckets;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (int(dataset[i].features.size()) != dim) {
      throw std::invalid_argument(
          "train_ensemble: inconsistent feature lengths");
    }
    buckets[std::size_t(classify_range_by_area(dataset[i].last_area, split))]
        .push_back(i);
  }

  // shared whole-data folds for route=All
  std::vector<std::vector<std::size_t>> all_folds;
  if (route == RouteTrain::All) {
    all_folds = partition_folds(dataset, folds, mix_seed(cfg.rng_seed, 7));
  }

  struct Job {
    RangeClass range;
    int fold;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
  };
  std::vector<Job> jobs_list;

  for (const RangeClass range :
       {RangeClass::Near, RangeClass::Medium, RangeClass::Far}) {
    const auto& bucket = buckets[std::size_t(range)];
    if (bucket.size() < std::size_t(folds)) continue;  // trains zero models

    if (route == RouteTrain::Bucketed) {
      std::vector<DatasetSample> view;
      view.reserve(bucket.size());
      for (const std::size_t i : bucket) view.push_back(dataset[i]);
      const auto bucket_folds = partition_folds(
          view, folds, mix_seed(cfg.rng_seed, 11, std::uint64_t(range)));
      for (int f = 0; f < folds; ++f) {
        Job j;
        j.range = range;
        j.fold = f;
        for (int g = 0; g < folds; ++g) {
          for (const std::size_t local : bucket_folds[std::size_t(g)]) {
            (g == f ? j.val_idx : j.train_idx).push_back(bucket[local]);
          }
        }
        if (j.val_idx.empty() || j.train_idx.empty()) continue;
        jobs_list.push_back(std::move(j));
      }
    } else {
      for (int f = 0; f < folds; ++f) {
        Job j;
        j.range = range;
        j.fold = f;
        for (int g = 0; g < folds; ++g) {
          for (const std::size_t i : all_folds[std::size_t(g)]) {
            if (g != f) {
              j.train_idx.push_back(i);
            } else if (classify_range_by_area(dataset[i].last_area, split) ==
                       range) {
              j.val_idx.push_back(i);
            }
          }
        }
        // a fold may hold no samples of this range; validate on the full fold
        if (j.val_idx.empty()) j.val_idx = all_folds[std::size_t(f)];
        if (j.val_idx.empty() || j.train_idx.empty()) continue;
        jobs_list.push_back(std::move(j));
      }
    }
  }

  std::vector<MlpModel> trained(jobs_list.size());
  parallel_for(jobs_list.size(), jobs, [&](std::size_t ji) {
    const Job& job = jobs_list[ji];
    MlpTopology topo = profile.topology_for(job.range);
    topo.input_dim = dim;
    const std::vector<Sample> tr = collect(dataset, job.train_idx);
    const std::vector<Sample> va = collect(dataset, job.val_idx);

    MlpModel best;
    double best_mse = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < profile.replicas_per_fold; ++rep) {
      TrainConfig rep_cfg = cfg;
      rep_cfg.rng_seed =
          mix_seed(cfg.rng_seed, std::uint64_t(job.range),
                   std::uint64_t(job.fold), std::uint64_t(rep));
      TrainOutcome res = train(tr, va, topo, rep_cfg);
      if (res.model.meta.val_mse < best_mse) {
        best_mse = res.model.meta.val_mse;
        best = std::move(res.model);
      }
    }
    trained[ji] = std::move(best);
  });

  RangeEnsemble out;
  out.split = split;
  out.profile = profile.name;
  for (std::size_t ji = 0; ji < jobs_list.size(); ++ji) {
    out.models[jobs_list[ji].range].push_back(std::move(trained[ji]));
  }
  return out;
}

std::array<double, 4> predict(const RangeEnsemble& e,
                              std::span<const double> features,
                              double last_frame_area) {
  const RangeClass range = classify_range_by_area(last_frame_area, e.split);
  const auto it = e.models.find(range);
  if (it == e.models.end() || it->second.empty()) {
    throw MissingModelError(range);
  }
  std::array<double, 4> acc{};
  for (const MlpModel& m : it->second) {
    const std::array<double, 4> y = predict(m, features);
    for (std::size_t i = 0; i < 4; ++i) acc[i] += y[i];
  }
  for (double& v : acc) v /= double(it->second.size());
  return acc;
}

}  // namespace velo
