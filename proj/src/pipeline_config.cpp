#include "velo/pipeline_config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "velo/errors.hpp"

namespace velo {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " +
                                  where);
    }
  }
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it != j.end()) out = it->get<T>();
}

}  // namespace

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("bad JSON in " + path.string() + ": " + e.what());
  }

  PipelineConfig cfg;
  reject_unknown(j, {"version", "tracker", "features", "train", "split",
                     "profile", "route_train"},
                 "top level");
  maybe(j, "version", cfg.version);
  if (cfg.version != 1) {
    throw std::invalid_argument("config: unsupported version");
  }

  if (j.contains("tracker")) {
    const json& t = j["tracker"];
    reject_unknown(t,
                   {"grid", "pyramid_levels", "lk_window", "lk_max_iterations",
                    "lk_epsilon", "keep_fraction", "failure_fb_threshold",
                    "ncc_search_radius"},
                   "tracker");
    maybe(t, "grid", cfg.tracker.grid);
    maybe(t, "pyramid_levels", cfg.tracker.pyramid_levels);
    maybe(t, "lk_window", cfg.tracker.lk_window);
    maybe(t, "lk_max_iterations", cfg.tracker.lk_max_iterations);
    maybe(t, "lk_epsilon", cfg.tracker.lk_epsilon);
    maybe(t, "keep_fraction", cfg.tracker.keep_fraction);
    maybe(t, "failure_fb_threshold", cfg.tracker.failure_fb_threshold);
    maybe(t, "ncc_search_radius", cfg.tracker.ncc_search_radius);
    if (!cfg.tracker.valid()) {
      throw std::invalid_argument("config: invalid tracker section");
    }
  }

  if (j.contains("features")) {
    const json& f = j["features"];
    reject_unknown(f,
                   {"frame_skip", "shrink_fraction", "gaussian_taps",
                    "gaussian_sigma", "include_flow", "include_depth"},
                   "features");
    maybe(f, "frame_skip", cfg.features.frame_skip);
    maybe(f, "shrink_fraction", cfg.features.shrink_fraction);
    maybe(f, "gaussian_taps", cfg.features.gaussian_taps);
    maybe(f, "gaussian_sigma", cfg.features.gaussian_sigma);
    maybe(f, "include_flow", cfg.features.include_flow);
    maybe(f, "include_depth", cfg.features.include_depth);
  }

  if (j.contains("train")) {
    const json& t = j["train"];
    reject_unknown(t,
                   {"learning_rate", "adam_beta1", "adam_beta2", "adam_epsilon",
                    "weight_decay", "dropout_rate", "epochs", "batch_size",
                    "early_stop_patience", "rng_seed"},
                   "train");
    maybe(t, "learning_rate", cfg.train.learning_rate);
    maybe(t, "adam_beta1", cfg.train.adam_beta1);
    maybe(t, "adam_beta2", cfg.train.adam_beta2);
    maybe(t, "adam_epsilon", cfg.train.adam_epsilon);
    maybe(t, "weight_decay", cfg.train.weight_decay);
    maybe(t, "dropout_rate", cfg.train.dropout_rate);
    maybe(t, "epochs", cfg.train.epochs);
    maybe(t, "batch_size", cfg.train.batch_size);
    maybe(t, "early_stop_patience", cfg.train.early_stop_patience);
    maybe(t, "rng_seed", cfg.train.rng_seed);
    if (!cfg.train.valid()) {
      throw std::invalid_argument("config: invalid train section");
    }
  }

  if (j.contains("split")) {
    const json& s = j["split"];
    if (s.is_string()) {
      if (s.get<std::string>() != "calibrate") {
        throw std::invalid_argument(
            "config: split must be \"calibrate\" or {near_area, far_area}");
      }
      cfg.split = std::nullopt;
    } else {
      reject_unknown(s, {"near_area", "far_area"}, "split");
      AreaSplitConfig split;
      split.near_area_threshold = s.at("near_area").get<double>();
      split.far_area_threshold = s.at("far_area").get<double>();
      if (!split.valid()) {
        throw std::invalid_argument("config: invalid split thresholds");
      }
      cfg.split = split;
    }
  }

  maybe(j, "profile", cfg.profile);
  if (cfg.profile != "full" && cfg.profile != "ablation") {
    throw std::invalid_argument("config: profile must be full or ablation");
  }
  maybe(j, "route_train", cfg.route_train);
  if (cfg.route_train != "bucketed" && cfg.route_train != "all") {
    throw std::invalid_argument("config: route_train must be bucketed or all");
  }
  return cfg;
}

void save_pipeline_config(const std::filesystem::path& path,
                          const PipelineConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  j["tracker"] = {{"grid", cfg.tracker.grid},
                  {"pyramid_levels", cfg.tracker.pyramid_levels},
                  {"lk_window", cfg.tracker.lk_window},
                  {"lk_max_iterations", cfg.tracker.lk_max_iterations},
                  {"lk_epsilon", cfg.tracker.lk_epsilon},
                  {"keep_fraction", cfg.tracker.keep_fraction},
                  {"failure_fb_threshold", cfg.tracker.failure_fb_threshold},
                  {"ncc_search_radius", cfg.tracker.ncc_search_radius}};
  j["features"] = {{"frame_skip", cfg.features.frame_skip},
                   {"shrink_fraction", cfg.features.shrink_fraction},
                   {"gaussian_taps", cfg.features.gaussian_taps},
                   {"gaussian_sigma", cfg.features.gaussian_sigma},
                   {"include_flow", cfg.features.include_flow},
                   {"include_depth", cfg.features.include_depth}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"adam_beta1", cfg.train.adam_beta1},
                {"adam_beta2", cfg.train.adam_beta2},
                {"adam_epsilon", cfg.train.adam_epsilon},
                {"weight_decay", cfg.train.weight_decay},
                {"dropout_rate", cfg.train.dropout_rate},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"early_stop_patience", cfg.train.early_stop_patience},
                {"rng_seed", cfg.train.rng_seed}};
  if (cfg.split) {
    j["split"] = {{"near_area", cfg.split->near_area_threshold},
                  {"far_area", cfg.split->far_area_threshold}};
  } else {
    j["split"] = "calibrate";
  }
  j["profile"] = cfg.profile;
  j["route_train"] = cfg.route_train;

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string());
    out << j.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace velo
