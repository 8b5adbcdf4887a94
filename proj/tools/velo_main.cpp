// velo: monocular vehicle velocity estimation from dash-cam sequences.
// Subcommands cover the whole pipeline: synth, track, extract-features,
// calibrate-split, train, predict, evaluate, check-grad, bench.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "velo/bench.hpp"
#include "velo/dataset_io.hpp"
#include "velo/errors.hpp"
#include "velo/kernels.hpp"
#include "velo/parallel.hpp"
#include "velo/pipeline_config.hpp"
#include "velo/rng.hpp"
#include "velo/synthcam.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct GlobalOpts {
  std::string config_path;
  std::string kernels = "auto";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
};

velo::PipelineConfig effective_config(const GlobalOpts& g) {
  velo::PipelineConfig cfg;
  if (!g.config_path.empty()) {
    cfg = velo::load_pipeline_config(g.config_path);
  }
  if (g.seed_set) cfg.train.rng_seed = g.seed;
  return cfg;
}

void write_json_file(const std::string& out, const json& j) {
  const fs::path tmp = out + ".tmp";
  {
    std::ofstream o(tmp);
    if (!o) throw velo::IoError("cannot open " + tmp.string());
    o << j.dump(2) << "\n";
  }
  fs::rename(tmp, out);
}

std::vector<velo::SequenceManifest> load_all_manifests(
    const fs::path& dataset_dir) {
  const auto paths = velo::find_manifests(dataset_dir);
  if (paths.empty()) {
    throw velo::IoError("no *.manifest.json under " + dataset_dir.string());
  }
  std::vector<velo::SequenceManifest> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(velo::load_manifest(p));
  return out;
}

void draw_box_outline(std::vector<unsigned char>& rgb, int w, int h,
                      const velo::BoundingBox& b) {
  const auto set_green = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    unsigned char* px = rgb.data() + (std::size_t(y) * w + x) * 3;
    px[0] = 40;
    px[1] = 220;
    px[2] = 60;
  };
  const int x0 = int(std::lround(b.x)), x1 = int(std::lround(b.x + b.w));
  const int y0 = int(std::lround(b.y)), y1 = int(std::lround(b.y + b.h));
  for (int x = x0; x <= x1; ++x) {
    for (int t = 0; t < 2; ++t) {
      set_green(x, y0 + t);
      set_green(x, y1 - t);
    }
  }
  for (int y = y0; y <= y1; ++y) {
    for (int t = 0; t < 2; ++t) {
      set_green(x0 + t, y);
      set_green(x1 - t, y);
    }
  }
}

int cmd_synth(const GlobalOpts& g, int n, const std::string& profile_str,
              const std::string& out_dir) {
  velo::DistanceProfile profile;
  if (!profile_str.empty()) {
    double pn, pm, pf;
    if (std::sscanf(profile_str.c_str(), "%lf,%lf,%lf", &pn, &pm, &pf) != 3 ||
        pn < 0 || pm < 0 || pf < 0 || pn + pm + pf <= 0) {
      throw std::invalid_argument(
          "synth: --profile wants near,medium,far weights");
    }
    const double total = pn + pm + pf;
    profile.p_near = pn / total;
    profile.p_medium = pm / total;
    profile.p_far = pf / total;
  }
  velo::generate_dataset(n, profile, g.seed, out_dir, g.jobs);
  std::cerr << "synth: wrote " << n << " sequences to " << out_dir << "\n";
  return kExitOk;
}

int cmd_track(const GlobalOpts& g, const std::string& dataset_dir,
              const std::string& out_dir, const std::string& overlay_dir) {
  const velo::PipelineConfig cfg = effective_config(g);
  const auto manifests = load_all_manifests(dataset_dir);
  fs::create_directories(out_dir);
  if (!overlay_dir.empty()) fs::create_directories(overlay_dir);

  velo::parallel_for(manifests.size(), g.jobs, [&](std::size_t mi) {
    const velo::SequenceManifest& m = manifests[mi];
    const velo::VideoSequence seq = velo::load_sequence(m, dataset_dir);
    std::vector<velo::Track> tracks;
    for (std::size_t k = 0; k < m.annotations.size(); ++k) {
      velo::TrackRecord rec;
      rec.sequence_id = m.sequence_id;
      rec.vehicle_id = velo::vehicle_id_of(m.sequence_id, k);
      rec.track = velo::track_vehicle(seq, m.annotations[k].last_frame_box,
                                      cfg.tracker);
      velo::save_track(fs::path(out_dir) / (rec.vehicle_id + ".track.json"),
                       rec);
      tracks.push_back(std::move(rec.track));
    }
    if (!overlay_dir.empty()) {
      const fs::path seq_dir = fs::path(overlay_dir) / m.sequence_id;
      fs::create_directories(seq_dir);
      for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        const velo::ImageFrame& f = seq.frames[t];
        std::vector<unsigned char> rgb(std::size_t(f.width) * f.height * 3);
        for (std::size_t i = 0; i < f.intensity.size(); ++i) {
          const auto v = (unsigned char)(std::lround(
              std::clamp(f.intensity[i], 0.0f, 1.0f) * 255.0f));
          rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = v;
        }
        for (const velo::Track& tr : tracks) {
          draw_box_outline(rgb, f.width, f.height, tr.boxes[t]);
        }
        char name[32];
        std::snprintf(name, sizeof name, "f%04zu.png", t);
        velo::save_png_rgb(seq_dir / name, f.width, f.height, rgb);
      }
    }
  });
  std::cerr << "track: wrote tracks for " << manifests.size()
            << " sequences to " << out_dir << "\n";
  return kExitOk;
}

int cmd_extract_features(const GlobalOpts& g, const std::string& dataset_dir,
                         const std::string& tracks_dir, const std::string& out,
                         const std::string& flow_dir,
                         const std::string& depth_dir) {
  velo::PipelineConfig cfg = effective_config(g);
  if (!flow_dir.empty()) cfg.features.include_flow = true;
  if (!depth_dir.empty()) cfg.features.include_depth = true;
  if (cfg.features.include_flow && flow_dir.empty()) {
    throw std::invalid_argument(
        "extract-features: config enables flow but --flow-dir is missing");
  }
  if (cfg.features.include_depth && depth_dir.empty()) {
    throw std::invalid_argument(
        "extract-features: config enables depth but --depth-dir is missing");
  }
  const auto manifests = load_all_manifests(dataset_dir);

  std::vector<std::vector<velo::FeatureRecord>> per_seq(manifests.size());
  velo::parallel_for(manifests.size(), g.jobs, [&](std::size_t mi) {
    const velo::SequenceManifest& m = manifests[mi];
    if (m.frame_files.empty()) {
      throw velo::FormatError("sequence " + m.sequence_id + " has no frames");
    }
    // only the dimensions are needed here, not the whole sequence
    const velo::ImageFrame first =
        velo::load_frame(fs::path(dataset_dir) / m.frame_files[0]);
    velo::FeatureConfig fc = cfg.features;
    fc.image_width = first.width;
    fc.image_height = first.height;

    const std::size_t frames = m.frame_files.size();
    std::vector<velo::FlowField> flow;
    std::vector<velo::DenseMap> depth;
    if (fc.include_flow) {
      for (std::size_t t = 0; t + 1 < frames; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "f%04zu.flo", t);
        flow.push_back(
            velo::load_flow_field(fs::path(flow_dir) / m.sequence_id / name));
      }
    }
    if (fc.include_depth) {
      for (std::size_t t = 0; t < frames; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "f%04zu.pfm", t);
        depth.push_back(velo::load_disparity_map(fs::path(depth_dir) /
                                                 m.sequence_id / name));
      }
    }

    for (std::size_t k = 0; k < m.annotations.size(); ++k) {
      const std::string vid = velo::vehicle_id_of(m.sequence_id, k);
      const velo::TrackRecord rec =
          velo::load_track(fs::path(tracks_dir) / (vid + ".track.json"));
      if (rec.track.boxes.size() != frames) {
        throw velo::FormatError("track length mismatch for " + vid);
      }
      velo::FeatureRecord fr;
      fr.vehicle_id = vid;
      fr.features = velo::assemble_features(
          rec.track, fc.include_flow ? &flow : nullptr,
          fc.include_depth ? &depth : nullptr, fc);
      per_seq[mi].push_back(std::move(fr));
    }
  });

  std::vector<velo::FeatureRecord> records;
  for (auto& chunk : per_seq) {
    for (auto& r : chunk) records.push_back(std::move(r));
  }
  velo::save_features(out, records);
  std::cerr << "extract-features: wrote " << records.size()
            << " feature vectors to " << out << "\n";
  return kExitOk;
}

std::vector<velo::RangeSample> annotation_range_samples(
    const std::vector<velo::SequenceManifest>& manifests) {
  std::vector<velo::RangeSample> samples;
  for (const auto& m : manifests) {
    for (const auto& a : m.annotations) {
      const auto d = a.distance();
      if (!d) continue;
      samples.push_back({velo::box_area(a.last_frame_box), *d});
    }
  }
  return samples;
}

int cmd_calibrate_split(const std::string& dataset_dir,
                        const std::string& out) {
  const auto manifests = load_all_manifests(dataset_dir);
  const velo::AreaSplitConfig split =
      velo::calibrate_area_thresholds(annotation_range_samples(manifests));
  write_json_file(out, json{{"near_area", split.near_area_threshold},
                            {"far_area", split.far_area_threshold}});
  std::cerr << "calibrate-split: near_area=" << split.near_area_threshold
            << " far_area=" << split.far_area_threshold << "\n";
  return kExitOk;
}

velo::AreaSplitConfig load_split_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw velo::IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw velo::FormatError("bad JSON in " + path.string() + ": " + e.what());
  }
  velo::AreaSplitConfig split;
  split.near_area_threshold = j.at("near_area").get<double>();
  split.far_area_threshold = j.at("far_area").get<double>();
  if (!split.valid()) {
    throw std::invalid_argument("split file: invalid thresholds");
  }
  return split;
}

std::vector<velo::DatasetSample> join_training_samples(
    const std::vector<velo::SequenceManifest>& manifests,
    const std::vector<velo::FeatureRecord>& features) {
  std::map<std::string, const velo::FeatureRecord*> by_id;
  for (const auto& f : features) by_id[f.vehicle_id] = &f;

  std::vector<velo::DatasetSample> out;
  std::vector<std::string> missing;
  for (const auto& m : manifests) {
    for (std::size_t k = 0; k < m.annotations.size(); ++k) {
      const velo::VehicleAnnotation& a = m.annotations[k];
      const std::string vid = velo::vehicle_id_of(m.sequence_id, k);
      const auto it = by_id.find(vid);
      if (it == by_id.end()) {
        missing.push_back(vid + " (no features)");
        continue;
      }
      if (!a.velocity || !a.position) {
        missing.push_back(vid + " (no ground truth)");
        continue;
      }
      velo::DatasetSample s;
      s.vehicle_id = vid;
      s.drive_id = m.drive_id;
      s.features = it->second->features.values;
      s.targets = {(*a.velocity)[0], (*a.velocity)[1], (*a.position)[0],
                   (*a.position)[1]};
      s.last_area = velo::box_area(a.last_frame_box);
      out.push_back(std::move(s));
    }
  }
  if (!missing.empty()) {
    std::string msg = "train: unusable vehicles:";
    for (const auto& v : missing) msg += "\n  " + v;
    throw std::invalid_argument(msg);
  }
  return out;
}

int cmd_train(const GlobalOpts& g, const std::string& dataset_dir,
              const std::string& features_path, const std::string& out_dir,
              const std::string& split_arg, const std::string& profile,
              const std::string& route) {
  velo::PipelineConfig cfg = effective_config(g);
  if (!profile.empty()) cfg.profile = profile;
  if (!route.empty()) cfg.route_train = route;
  if (cfg.profile != "full" && cfg.profile != "ablation") {
    throw std::invalid_argument("train: profile must be full or ablation");
  }
  if (cfg.route_train != "bucketed" && cfg.route_train != "all") {
    throw std::invalid_argument("train: route-train must be bucketed or all");
  }

  const auto manifests = load_all_manifests(dataset_dir);
  const auto features = velo::load_features(features_path);
  const auto dataset = join_training_samples(manifests, features);

  velo::AreaSplitConfig split;
  if (!split_arg.empty() && split_arg != "calibrate") {
    split = load_split_file(split_arg);
  } else if (split_arg.empty() && cfg.split) {
    split = *cfg.split;
  } else {
    split =
        velo::calibrate_area_thresholds(annotation_range_samples(manifests));
    std::cerr << "train: calibrated split near_area="
              << split.near_area_threshold
              << " far_area=" << split.far_area_threshold << "\n";
  }

  const velo::EnsembleProfile prof = cfg.profile == "ablation"
                                         ? velo::EnsembleProfile::ablation()
                                         : velo::EnsembleProfile::full();
  const velo::RouteTrain rt = cfg.route_train == "all"
                                  ? velo::RouteTrain::All
                                  : velo::RouteTrain::Bucketed;
  velo::RangeEnsemble ensemble =
      velo::train_ensemble(dataset, split, prof, cfg.train, rt, 5, g.jobs);
  ensemble.profile = cfg.profile;
  const fs::path manifest = velo::save_ensemble(out_dir, ensemble);
  std::size_t total = 0;
  for (const auto& [r, models] : ensemble.models) total += models.size();
  std::cerr << "train: wrote " << total << " models, manifest " << manifest
            << "\n";
  return kExitOk;
}

int cmd_predict(const std::string& ensemble_path,
                const std::string& features_path,
                const std::string& dataset_dir, const std::string& out) {
  const velo::RangeEnsemble ensemble = velo::load_ensemble(ensemble_path);
  const auto features = velo::load_features(features_path);
  const auto manifests = load_all_manifests(dataset_dir);

  std::map<std::string, double> area_of;
  for (const auto& m : manifests) {
    for (std::size_t k = 0; k < m.annotations.size(); ++k) {
      area_of[velo::vehicle_id_of(m.sequence_id, k)] =
          velo::box_area(m.annotations[k].last_frame_box);
    }
  }

  std::vector<velo::PredictionRecord> preds;
  for (const auto& f : features) {
    const auto it = area_of.find(f.vehicle_id);
    if (it == area_of.end()) {
      throw std::invalid_argument("predict: vehicle " + f.vehicle_id +
                                  " not present in the dataset manifests");
    }
    const auto y = velo::predict(ensemble, f.features.values, it->second);
    velo::PredictionRecord rec;
    rec.vehicle_id = f.vehicle_id;
    rec.velocity = {y[0], y[1]};
    rec.position = {y[2], y[3]};
    preds.push_back(std::move(rec));
  }
  velo::save_predictions(out, preds);
  std::cerr << "predict: wrote " << preds.size() << " predictions to " << out
            << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& dataset_dir,
                 const std::string& predictions_path, const std::string& out,
                 const std::string& plot) {
  const auto manifests = load_all_manifests(dataset_dir);
  const auto preds = velo::load_predictions(predictions_path);

  struct Truth {
    std::array<double, 2> velocity;
    double distance;
  };
  std::map<std::string, Truth> truth;
  std::vector<std::string> missing;
  for (const auto& m : manifests) {
    for (std::size_t k = 0; k < m.annotations.size(); ++k) {
      const auto& a = m.annotations[k];
      if (!a.velocity || !a.position) continue;
      truth[velo::vehicle_id_of(m.sequence_id, k)] = {*a.velocity,
                                                      *a.distance()};
    }
  }

  std::vector<velo::EvalSample> samples;
  for (const auto& p : preds) {
    const auto it = truth.find(p.vehicle_id);
    if (it == truth.end()) {
      missing.push_back(p.vehicle_id);
      continue;
    }
    velo::EvalSample s;
    s.vehicle_id = p.vehicle_id;
    s.predicted_velocity = p.velocity;
    s.true_velocity = it->second.velocity;
    s.true_distance = it->second.distance;
    samples.push_back(std::move(s));
  }
  if (!missing.empty()) {
    std::string msg = "evaluate: vehicles without usable ground truth:";
    for (const auto& v : missing) msg += "\n  " + v;
    throw std::invalid_argument(msg);
  }

  const velo::EvaluationReport report = velo::evaluate_dataset(samples);
  velo::save_report(out, report);
  if (!plot.empty()) velo::save_report_svg(plot, report);
  const auto show = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("n/a");
  };
  std::cerr << "evaluate: e_near=" << show(report.e_near)
            << " e_medium=" << show(report.e_medium)
            << " e_far=" << show(report.e_far) << " e_v=" << show(report.e_v)
            << " rmse=" << report.rmse_overall << "\n";
  return kExitOk;
}

int cmd_check_grad(const GlobalOpts& g, int bits, int trials, double eps) {
  if (bits != 32 && bits != 64) {
    throw std::invalid_argument("check-grad: --bits must be 32 or 64");
  }
  if (trials < 1) throw std::invalid_argument("check-grad: --trials >= 1");
  if (eps <= 0.0) eps = bits == 64 ? 1e-5 : 1e-3;
  velo::Rng rng(velo::mix_seed(g.seed, 0xC4ADull));
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    velo::MlpTopology topo;
    topo.input_dim = 2 + int(rng.index(10));
    topo.hidden_layers = 1 + int(rng.index(3));
    topo.hidden_units = 3 + int(rng.index(12));
    worst =
        std::max(worst, velo::check_gradients(topo, rng.bits(), eps, bits));
  }
  std::printf("check-grad bits=%d trials=%d eps=%g max_rel_err=%.3e\n", bits,
              trials, eps, worst);
  const double threshold = bits == 64 ? 1e-6 : 1e-3;
  return worst < threshold ? kExitOk : kExitValidation;
}

int cmd_bench(const GlobalOpts& g, const std::string& what, int width,
              int height, const std::string& out) {
  json j;
  if (what == "track") {
    const velo::TrackerConfig cfg = effective_config(g).tracker;
    const velo::TrackBenchResult r =
        velo::bench_median_flow(width, height, 25, cfg);
    j = json{{"bench", "track"},     {"width", r.width},
             {"height", r.height},   {"steps", r.steps},
             {"median_ms", r.median_ms}, {"mean_ms", r.mean_ms}};
    std::cerr << "bench track: median " << r.median_ms << " ms, mean "
              << r.mean_ms << " ms per frame (" << r.width << "x" << r.height
              << ")\n";
  } else if (what == "mlp") {
    const velo::MlpBenchResult r =
        velo::bench_mlp_inference({57, 4, 70, 4}, 5, 2000);
    j = json{{"bench", "mlp"},
             {"models", r.models},
             {"reps", r.reps},
             {"per_vehicle_us", r.per_vehicle_us}};
    std::cerr << "bench mlp: " << r.per_vehicle_us
              << " us per vehicle (5 x 4x70)\n";
  } else {
    throw std::invalid_argument("bench: expected 'track' or 'mlp'");
  }
  if (!out.empty()) write_json_file(out, j);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"monocular vehicle velocity estimation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOpts g;
  app.add_option("--config", g.config_path, "pipeline config JSON")
      ->envname("VELO_CONFIG");
  app.add_option("--kernels", g.kernels, "kernel backend: auto|scalar|avx2");
  auto* seed_opt = app.add_option("--seed", g.seed, "master random seed");
  app.add_option("--jobs", g.jobs, "parallel workers");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  int synth_n = 10;
  std::string synth_profile, synth_out;
  synth->add_option("--n", synth_n, "number of sequences");
  synth->add_option("--profile", synth_profile,
                    "near,medium,far weights (default 12,65,23)");
  synth->add_option("--out-dir", synth_out, "output directory")->required();

  auto* track = app.add_subcommand("track", "track annotated vehicles");
  std::string track_dataset, track_out, track_overlay;
  track->add_option("--dataset", track_dataset, "dataset directory")
      ->required();
  track->add_option("--out-dir", track_out, "track output directory")
      ->required();
  track->add_option("--overlay-dir", track_overlay,
                    "write annotated PNG frames here");

  auto* extract =
      app.add_subcommand("extract-features", "assemble feature vectors");
  std::string ef_dataset, ef_tracks, ef_out, ef_flow, ef_depth;
  extract->add_option("--dataset", ef_dataset, "dataset directory")
      ->required();
  extract->add_option("--tracks-dir", ef_tracks, "directory of track files")
      ->required();
  extract->add_option("--out", ef_out, "features JSON path")->required();
  extract->add_option("--flow-dir", ef_flow,
                      "precomputed .flo maps, one subdirectory per sequence");
  extract->add_option("--depth-dir", ef_depth,
                      "precomputed PFM disparity maps");

  auto* calib = app.add_subcommand("calibrate-split",
                                   "fit area thresholds to distances");
  std::string cs_dataset, cs_out;
  calib->add_option("--dataset", cs_dataset, "dataset directory")->required();
  calib->add_option("--out", cs_out, "split JSON path")->required();

  auto* train = app.add_subcommand("train", "train the range ensemble");
  std::string tr_dataset, tr_features, tr_out, tr_split, tr_profile, tr_route;
  bool tr_ablation = false;
  train->add_option("--dataset", tr_dataset, "dataset directory")->required();
  train->add_option("--features", tr_features, "features JSON")->required();
  train->add_option("--out-dir", tr_out, "model output directory")->required();
  train->add_option("--split", tr_split,
                    "split JSON path or 'calibrate' (default from config)");
  train->add_option("--profile", tr_profile, "full|ablation");
  train->add_flag("--ablation", tr_ablation,
                  "shorthand for --profile ablation");
  train->add_option("--route-train", tr_route, "bucketed|all");

  auto* predict = app.add_subcommand("predict", "run ensemble inference");
  std::string pr_ensemble, pr_features, pr_dataset, pr_out;
  predict->add_option("--ensemble", pr_ensemble, "ensemble manifest JSON")
      ->required();
  predict->add_option("--features", pr_features, "features JSON")->required();
  predict->add_option("--dataset", pr_dataset,
                      "dataset directory (box areas route the ranges)")
      ->required();
  predict->add_option("--out", pr_out, "predictions JSON path")->required();

  auto* evaluate =
      app.add_subcommand("evaluate", "score predictions against ground truth");
  std::string ev_dataset, ev_preds, ev_out, ev_plot;
  evaluate->add_option("--dataset", ev_dataset, "dataset directory")
      ->required();
  evaluate->add_option("--predictions", ev_preds, "predictions JSON")
      ->required();
  evaluate->add_option("--out", ev_out, "report JSON path")->required();
  evaluate->add_option("--plot", ev_plot, "optional per-range bar plot SVG");

  auto* check =
      app.add_subcommand("check-grad", "finite-difference gradient oracle");
  int cg_bits = 64, cg_trials = 100;
  double cg_eps = 0.0;
  check->add_option("--bits", cg_bits, "arithmetic width: 32|64");
  check->add_option("--trials", cg_trials, "random topologies to verify");
  check->add_option("--eps", cg_eps, "finite-difference step");

  auto* bench = app.add_subcommand("bench", "timing measurements");
  std::string bench_what, bench_out;
  int bench_w = 1280, bench_h = 720;
  bench->add_option("what", bench_what, "track|mlp")->required();
  bench->add_option("--width", bench_w, "frame width");
  bench->add_option("--height", bench_h, "frame height");
  bench->add_option("--out", bench_out, "write JSON results here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  g.seed_set = seed_opt->count() > 0;

  try {
    if (!velo::kernels::select(g.kernels)) {
      throw std::invalid_argument("unknown or unsupported kernel backend: " +
                                  g.kernels);
    }
    if (synth->parsed()) {
      return cmd_synth(g, synth_n, synth_profile, synth_out);
    }
    if (track->parsed()) {
      return cmd_track(g, track_dataset, track_out, track_overlay);
    }
    if (extract->parsed()) {
      return cmd_extract_features(g, ef_dataset, ef_tracks, ef_out, ef_flow,
                                  ef_depth);
    }
    if (calib->parsed()) return cmd_calibrate_split(cs_dataset, cs_out);
    if (train->parsed()) {
      if (tr_ablation) tr_profile = "ablation";
      return cmd_train(g, tr_dataset, tr_features, tr_out, tr_split,
                       tr_profile, tr_route);
    }
    if (predict->parsed()) {
      return cmd_predict(pr_ensemble, pr_features, pr_dataset, pr_out);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(ev_dataset, ev_preds, ev_out, ev_plot);
    }
    if (check->parsed()) return cmd_check_grad(g, cg_bits, cg_trials, cg_eps);
    if (bench->parsed()) {
      return cmd_bench(g, bench_what, bench_w, bench_h, bench_out);
    }
  } catch (const velo::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const velo::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
