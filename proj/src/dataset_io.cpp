#include "velo/dataset_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "velo/errors.hpp"

namespace velo {

using nlohmann::json;

namespace {

// temp file + rename so rerunning a command can never leave a torn file
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string());
    out.write(text.data(), std::streamsize(text.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json_atomic(const std::filesystem::path& path, const json& j) {
  write_text_atomic(path, j.dump(2) + "\n");
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("bad JSON in " + path.string() + ": " + e.what());
  }
}

const json& field(const json& j, const char* name,
                  const std::filesystem::path& path) {
  const auto it = j.find(name);
  if (it == j.end()) {
    throw FormatError("missing field '" + std::string(name) + "' in " +
                      path.string());
  }
  return *it;
}

json box_to_json(const BoundingBox& b) {
  return json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}};
}

BoundingBox box_from_json(const json& j, const std::filesystem::path& path) {
  return {field(j, "x", path).get<double>(), field(j, "y", path).get<double>(),
          field(j, "w", path).get<double>(), field(j, "h", path).get<double>()};
}

int pgm_value(std::FILE* f, const std::filesystem::path& path) {
  int c;
  for (;;) {  // skip whitespace and # comments
    c = std::fgetc(f);
    if (c == '#') {
      while ((c = std::fgetc(f)) != EOF && c != '\n') {
      }
    } else if (c != EOF && !std::isspace(c)) {
      break;
    } else if (c == EOF) {
      throw FormatError("truncated PGM header in " + path.string());
    }
  }
  int v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = std::fgetc(f);
  }
  return v;
}

}  // namespace

ImageFrame load_pgm(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open " + path.string());
  struct Close {
    std::FILE* f;
    ~Close() { std::fclose(f); }
  } close{f};

  char magic[2];
  if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P' || magic[1] != '5') {
    throw FormatError("not a binary PGM: " + path.string());
  }
  const int w = pgm_value(f, path);
  const int h = pgm_value(f, path);
  const int maxval = pgm_value(f, path);
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw FormatError("unsupported PGM header in " + path.string());
  }
  std::vector<unsigned char> bytes(std::size_t(w) * h);
  if (std::fread(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
    throw FormatError("truncated PGM payload in " + path.string());
  }
  ImageFrame frame;
  frame.width = w;
  frame.height = h;
  frame.intensity.resize(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    frame.intensity[i] = float(bytes[i]) / 255.0f;
  }
  return frame;
}

void save_pgm(const std::filesystem::path& path, const ImageFrame& frame) {
  if (!frame.valid()) throw std::invalid_argument("save_pgm: bad frame");
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
    if (!f) throw IoError("cannot open " + tmp.string());
    std::fprintf(f, "P5\n%d %d\n255\n", frame.width, frame.height);
    std::vector<unsigned char> bytes(frame.intensity.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      const float v = std::clamp(frame.intensity[i], 0.0f, 1.0f);
      bytes[i] = (unsigned char)(std::lround(v * 255.0f));
    }
    const std::size_t written = std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    if (written != bytes.size()) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ImageFrame load_png(const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw IoError("cannot open " + path.string());
  struct Close {
    std::FILE* f;
    ~Close() { std::fclose(f); }
  } close{f};

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  struct Destroy {
    png_structp* png;
    png_infop* info;
    ~Destroy() { png_destroy_read_struct(png, info, nullptr); }
  } destroy{&png, &info};

  if (setjmp(png_jmpbuf(png))) {
    throw FormatError("bad PNG: " + path.string());
  }
  png_init_io(png, f);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth != 8) {
    if (depth < 8) {
      png_set_expand(png);
    } else {
      throw FormatError("only 8-bit PNG supported: " + path.string());
    }
  }
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  std::vector<unsigned char> row(std::size_t(w) * std::size_t(channels));
  ImageFrame frame;
  frame.width = int(w);
  frame.height = int(h);
  frame.intensity.resize(std::size_t(w) * h);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      float v;
      if (channels >= 3) {
        v = luma(row[x * channels] / 255.0f, row[x * channels + 1] / 255.0f,
                 row[x * channels + 2] / 255.0f);
      } else {
        v = row[x * channels] / 255.0f;
      }
      frame.intensity[std::size_t(y) * w + x] = v;
    }
  }
  return frame;
}

void save_png_rgb(const std::filesystem::path& path, int width, int height,
                  const std::vector<unsigned char>& rgb) {
  if (rgb.size() != std::size_t(width) * height * 3) {
    throw std::invalid_argument("save_png_rgb: buffer size mismatch");
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
  if (!f) throw IoError("cannot open " + tmp.string());

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
    throw IoError("PNG write failed: " + tmp.string());
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<unsigned char*>(
                           rgb.data() + std::size_t(y) * width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
  std::filesystem::rename(tmp, path);
}

ImageFrame load_frame(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") return load_pgm(path);
  if (ext == ".png") return load_png(path);
  throw FormatError("unsupported frame format: " + path.string());
}

SequenceManifest load_manifest(const std::filesystem::path& path) {
  const json j = load_json(path);
  SequenceManifest m;
  m.sequence_id = field(j, "sequence_id", path).get<std::string>();
  m.drive_id = field(j, "drive_id", path).get<std::string>();
  m.fps = field(j, "fps", path).get<double>();
  if (!(m.fps > 0.0)) throw FormatError("fps must be > 0 in " + path.string());
  for (const auto& f : field(j, "frame_files", path)) {
    m.frame_files.push_back(f.get<std::string>());
  }
  for (const auto& a : field(j, "annotations", path)) {
    VehicleAnnotation ann;
    ann.last_frame_box = box_from_json(field(a, "last_frame_box", path), path);
    const json& vel = field(a, "velocity", path);
    if (!vel.is_null()) {
      ann.velocity = {vel.at(0).get<double>(), vel.at(1).get<double>()};
    }
    const json& pos = field(a, "position", path);
    if (!pos.is_null()) {
      ann.position = {pos.at(0).get<double>(), pos.at(1).get<double>()};
    }
    m.annotations.push_back(std::move(ann));
  }
  return m;
}

void save_manifest(const std::filesystem::path& path,
                   const SequenceManifest& m) {
  json anns = json::array();
  for (const VehicleAnnotation& a : m.annotations) {
    json ja;
    ja["last_frame_box"] = box_to_json(a.last_frame_box);
    ja["velocity"] =
        a.velocity ? json{(*a.velocity)[0], (*a.velocity)[1]} : json();
    ja["position"] =
        a.position ? json{(*a.position)[0], (*a.position)[1]} : json();
    anns.push_back(std::move(ja));
  }
  const json j{{"sequence_id", m.sequence_id},
               {"drive_id", m.drive_id},
               {"fps", m.fps},
               {"frame_files", m.frame_files},
               {"annotations", anns}};
  write_json_atomic(path, j);
}

std::vector<std::filesystem::path> find_manifests(
    const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 14 &&
        name.compare(name.size() - 14, 14, ".manifest.json") == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

VideoSequence load_sequence(const SequenceManifest& m,
                            const std::filesystem::path& manifest_dir) {
  VideoSequence seq;
  seq.sequence_id = m.sequence_id;
  seq.drive_id = m.drive_id;
  seq.fps = m.fps;
  seq.frames.reserve(m.frame_files.size());
  for (const std::string& rel : m.frame_files) {
    seq.frames.push_back(load_frame(manifest_dir / rel));
  }
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    if (seq.frames[i].width != seq.frames[0].width ||
        seq.frames[i].height != seq.frames[0].height) {
      throw FormatError("frame dimensions differ within sequence " +
                        m.sequence_id);
    }
  }
  return seq;
}

void save_ground_truth(const std::filesystem::path& path,
                       const std::string& sequence_id,
                       const SyntheticGroundTruth& gt) {
  json vehicles = json::array();
  for (const VehicleGroundTruth& v : gt.vehicles) {
    json boxes = json::array();
    for (const BoundingBox& b : v.boxes) {
      boxes.push_back(json{b.x, b.y, b.w, b.h});
    }
    vehicles.push_back(json{{"boxes", boxes},
                            {"velocity", {v.velocity[0], v.velocity[1]}},
                            {"position", {v.position[0], v.position[1]}},
                            {"distance", v.distance}});
  }
  const json j{{"sequence_id", sequence_id},
               {"velocity_convention", {{"x", "lateral"}, {"y", "longitudinal"}}},
               {"vehicles", vehicles}};
  write_json_atomic(path, j);
}

SyntheticGroundTruth load_ground_truth(const std::filesystem::path& path) {
  const json j = load_json(path);
  SyntheticGroundTruth gt;
  for (const auto& v : field(j, "vehicles", path)) {
    VehicleGroundTruth g;
    for (const auto& b : field(v, "boxes", path)) {
      g.boxes.push_back({b.at(0).get<double>(), b.at(1).get<double>(),
                         b.at(2).get<double>(), b.at(3).get<double>()});
    }
    const json& vel = field(v, "velocity", path);
    g.velocity = {vel.at(0).get<double>(), vel.at(1).get<double>()};
    const json& pos = field(v, "position", path);
    g.position = {pos.at(0).get<double>(), pos.at(1).get<double>()};
    g.distance = field(v, "distance", path).get<double>();
    gt.vehicles.push_back(std::move(g));
  }
  return gt;
}

void save_track(const std::filesystem::path& path, const TrackRecord& rec) {
  json boxes = json::array();
  json source = json::array();
  for (std::size_t i = 0; i < rec.track.boxes.size(); ++i) {
    const BoundingBox& b = rec.track.boxes[i];
    boxes.push_back(json{b.x, b.y, b.w, b.h});
    source.push_back(rec.track.source[i] == TrackSource::MedianFlow ? "mf"
                                                                    : "fb");
  }
  const json j{{"sequence_id", rec.sequence_id},
               {"vehicle_id", rec.vehicle_id},
               {"boxes", boxes},
               {"source", source}};
  write_json_atomic(path, j);
}

TrackRecord load_track(const std::filesystem::path& path) {
  const json j = load_json(path);
  TrackRecord rec;
  rec.sequence_id = field(j, "sequence_id", path).get<std::string>();
  rec.vehicle_id = field(j, "vehicle_id", path).get<std::string>();
  for (const auto& b : field(j, "boxes", path)) {
    rec.track.boxes.push_back({b.at(0).get<double>(), b.at(1).get<double>(),
                               b.at(2).get<double>(), b.at(3).get<double>()});
  }
  for (const auto& s : field(j, "source", path)) {
    const std::string v = s.get<std::string>();
    if (v != "mf" && v != "fb") {
      throw FormatError("bad source flag in " + path.string());
    }
    rec.track.source.push_back(v == "mf" ? TrackSource::MedianFlow
                                         : TrackSource::Fallback);
  }
  if (rec.track.boxes.size() != rec.track.source.size()) {
    throw FormatError("boxes/source length mismatch in " + path.string());
  }
  rec.track.clipped.assign(rec.track.boxes.size(), 0);
  return rec;
}

void save_features(const std::filesystem::path& path,
                   const std::vector<FeatureRecord>& recs) {
  json arr = json::array();
  for (const FeatureRecord& r : recs) {
    arr.push_back(json{{"vehicle_id", r.vehicle_id},
                       {"layout_version", r.features.layout_version},
                       {"values", r.features.values}});
  }
  write_json_atomic(path, arr);
}

std::vector<FeatureRecord> load_features(const std::filesystem::path& path) {
  const json j = load_json(path);
  if (!j.is_array()) {
    throw FormatError("features file must be a JSON array: " + path.string());
  }
  std::vector<FeatureRecord> out;
  for (const auto& r : j) {
    FeatureRecord rec;
    rec.vehicle_id = field(r, "vehicle_id", path).get<std::string>();
    rec.features.layout_version =
        field(r, "layout_version", path).get<int>();
    for (const auto& v : field(r, "values", path)) {
      rec.features.values.push_back(v.get<double>());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void save_model(const std::filesystem::path& path, const MlpModel& model,
                int layout_version) {
  json layers = json::array();
  for (const MlpLayer& l : model.params.layers) {
    layers.push_back(json{{"rows", l.rows},
                          {"cols", l.cols},
                          {"weights", l.w},
                          {"bias", l.b}});
  }
  const json j{
      {"layout_version", layout_version},
      {"topology",
       {{"input_dim", model.params.topo.input_dim},
        {"hidden_layers", model.params.topo.hidden_layers},
        {"hidden_units", model.params.topo.hidden_units},
        {"output_dim", model.params.topo.output_dim}}},
      {"feature_standardization",
       {{"means", model.feat_mean}, {"stds", model.feat_std}}},
      {"layers", layers},
      {"train_meta",
       {{"seed", model.meta.seed},
        {"best_epoch", model.meta.best_epoch},
        {"val_mse", model.meta.val_mse}}}};
  write_json_atomic(path, j);
}

MlpModel load_model(const std::filesystem::path& path) {
  const json j = load_json(path);
  MlpModel m;
  const json& topo = field(j, "topology", path);
  m.params.topo.input_dim = field(topo, "input_dim", path).get<int>();
  m.params.topo.hidden_layers = field(topo, "hidden_layers", path).get<int>();
  m.params.topo.hidden_units = field(topo, "hidden_units", path).get<int>();
  m.params.topo.output_dim = field(topo, "output_dim", path).get<int>();
  const json& std_ = field(j, "feature_standardization", path);
  m.feat_mean = field(std_, "means", path).get<std::vector<double>>();
  m.feat_std = field(std_, "stds", path).get<std::vector<double>>();
  for (const auto& l : field(j, "layers", path)) {
    MlpLayer layer;
    layer.rows = field(l, "rows", path).get<int>();
    layer.cols = field(l, "cols", path).get<int>();
    layer.w = field(l, "weights", path).get<std::vector<double>>();
    layer.b = field(l, "bias", path).get<std::vector<double>>();
    if (layer.w.size() != std::size_t(layer.rows) * layer.cols ||
        layer.b.size() != std::size_t(layer.rows)) {
      throw FormatError("layer shape mismatch in " + path.string());
    }
    m.params.layers.push_back(std::move(layer));
  }
  if (m.params.layers.size() !=
      std::size_t(m.params.topo.hidden_layers) + 1) {
    throw FormatError("layer count mismatch in " + path.string());
  }
  const json& meta = field(j, "train_meta", path);
  m.meta.seed = field(meta, "seed", path).get<std::uint64_t>();
  m.meta.best_epoch = field(meta, "best_epoch", path).get<int>();
  m.meta.val_mse = field(meta, "val_mse", path).get<double>();
  return m;
}

std::filesystem::path save_ensemble(const std::filesystem::path& dir,
                                    const RangeEnsemble& ensemble) {
  std::filesystem::create_directories(dir);
  json ranges;
  for (const RangeClass range :
       {RangeClass::Near, RangeClass::Medium, RangeClass::Far}) {
    json paths = json::array();
    const auto it = ensemble.models.find(range);
    if (it != ensemble.models.end()) {
      for (std::size_t k = 0; k < it->second.size(); ++k) {
        const std::string name = std::string("model_") + to_string(range) +
                                 "_" + std::to_string(k) + ".json";
        save_model(dir / name, it->second[k]);
        paths.push_back(name);
      }
    }
    ranges[to_string(range)] = std::move(paths);
  }
  const json j{{"split",
                {{"near_area", ensemble.split.near_area_threshold},
                 {"far_area", ensemble.split.far_area_threshold}}},
               {"ranges", ranges},
               {"profile", ensemble.profile}};
  const std::filesystem::path manifest = dir / "ensemble.json";
  write_json_atomic(manifest, j);
  return manifest;
}

RangeEnsemble load_ensemble(const std::filesystem::path& manifest_path) {
  const json j = load_json(manifest_path);
  RangeEnsemble e;
  const json& split = field(j, "split", manifest_path);
  e.split.near_area_threshold =
      field(split, "near_area", manifest_path).get<double>();
  e.split.far_area_threshold =
      field(split, "far_area", manifest_path).get<double>();
  e.profile = field(j, "profile", manifest_path).get<std::string>();
  const json& ranges = field(j, "ranges", manifest_path);
  const std::filesystem::path dir = manifest_path.parent_path();
  for (const RangeClass range :
       {RangeClass::Near, RangeClass::Medium, RangeClass::Far}) {
    const auto it = ranges.find(to_string(range));
    if (it == ranges.end()) continue;
    std::vector<MlpModel> models;
    for (const auto& rel : *it) {
      models.push_back(load_model(dir / rel.get<std::string>()));
    }
    if (!models.empty()) e.models[range] = std::move(models);
  }
  return e;
}

void save_predictions(const std::filesystem::path& path,
                      const std::vector<PredictionRecord>& recs) {
  json arr = json::array();
  for (const PredictionRecord& r : recs) {
    arr.push_back(json{{"vehicle_id", r.vehicle_id},
                       {"velocity", {r.velocity[0], r.velocity[1]}},
                       {"position", {r.position[0], r.position[1]}}});
  }
  write_json_atomic(path, arr);
}

std::vector<PredictionRecord> load_predictions(
    const std::filesystem::path& path) {
  const json j = load_json(path);
  if (!j.is_array()) {
    throw FormatError("predictions file must be a JSON array: " +
                      path.string());
  }
  std::vector<PredictionRecord> out;
  for (const auto& r : j) {
    PredictionRecord rec;
    rec.vehicle_id = field(r, "vehicle_id", path).get<std::string>();
    const json& vel = field(r, "velocity", path);
    rec.velocity = {vel.at(0).get<double>(), vel.at(1).get<double>()};
    const json& pos = field(r, "position", path);
    rec.position = {pos.at(0).get<double>(), pos.at(1).get<double>()};
    out.push_back(std::move(rec));
  }
  return out;
}

void save_report(const std::filesystem::path& path,
                 const EvaluationReport& report) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json();
  };
  const json j{{"e_near", opt(report.e_near)},
               {"e_medium", opt(report.e_medium)},
               {"e_far", opt(report.e_far)},
               {"e_v", opt(report.e_v)},
               {"counts",
                {{"near", report.n_near},
                 {"medium", report.n_medium},
                 {"far", report.n_far}}},
               {"rmse_overall", report.rmse_overall}};
  write_json_atomic(path, j);
}

void save_report_svg(const std::filesystem::path& path,
                     const EvaluationReport& report) {
  const double vals[3] = {report.e_near.value_or(0.0),
                          report.e_medium.value_or(0.0),
                          report.e_far.value_or(0.0)};
  const char* labels[3] = {"near", "medium", "far"};
  double vmax = 1e-9;
  for (const double v : vals) vmax = std::max(vmax, v);

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"360\" "
      "height=\"240\">\n";
  for (int i = 0; i < 3; ++i) {
    const double bh = 180.0 * vals[i] / vmax;
    const double x = 40.0 + i * 100.0;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"60\" height=\"%.1f\" "
                  "fill=\"#4a90d9\"/>\n"
                  "<text x=\"%.1f\" y=\"225\" font-size=\"13\">%s</text>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\">%.3f</text>\n",
                  x, 200.0 - bh, bh, x + 10.0, labels[i], x,
                  195.0 - bh, vals[i]);
    svg += buf;
  }
  svg += "</svg>\n";
  write_text_atomic(path, svg);
}

std::string vehicle_id_of(const std::string& sequence_id, std::size_t index) {
  return sequence_id + ".v" + std::to_string(index);
}

}  // namespace velo
