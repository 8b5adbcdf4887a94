#include "velo/cues.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "velo/errors.hpp"

namespace velo {

namespace {

constexpr float kFloMagic = 202021.25f;

struct File {
  std::FILE* f = nullptr;
  explicit File(const std::filesystem::path& p, const char* mode) {
    f = std::fopen(p.string().c_str(), mode);
    if (!f) throw IoError("cannot open " + p.string());
  }
  ~File() {
    if (f) std::fclose(f);
  }
  File(const File&) = delete;
  File& operator=(const File&) = delete;
};

void read_exact(std::FILE* f, void* dst, std::size_t bytes,
                const std::filesystem::path& p) {
  if (std::fread(dst, 1, bytes, f) != bytes) {
    throw FormatError("truncated payload in " + p.string() + " at byte " +
                      std::to_string(std::ftell(f)));
  }
}

void write_exact(std::FILE* f, const void* src, std::size_t bytes,
                 const std::filesystem::path& p) {
  if (std::fwrite(src, 1, bytes, f) != bytes) {
    throw IoError("short write to " + p.string());
  }
}

}  // namespace

double DenseMap::sample(double x, double y) const {
  // positions in cell units, value grid anchored at cell centers
  const double u = std::clamp(x - 0.5, 0.0, double(width - 1));
  const double v = std::clamp(y - 0.5, 0.0, double(height - 1));
  const int x0 = std::min(int(u), width - 2 >= 0 ? width - 2 : 0);
  const int y0 = std::min(int(v), height - 2 >= 0 ? height - 2 : 0);
  const int x1 = std::min(x0 + 1, width - 1);
  const int y1 = std::min(y0 + 1, height - 1);
  const double ax = u - x0;
  const double ay = v - y0;
  return (1.0 - ay) * ((1.0 - ax) * cell(x0, y0) + ax * cell(x1, y0)) +
         ay * ((1.0 - ax) * cell(x0, y1) + ax * cell(x1, y1));
}

bool DenseMap::valid() const {
  return width > 0 && height > 0 &&
         values.size() == std::size_t(width) * height;
}

bool FeatureConfig::valid() const {
  return frame_skip >= 1 && gaussian_taps >= 1 && gaussian_taps % 2 == 1 &&
         gaussian_sigma > 0.0 && shrink_fraction >= 0.0 &&
         shrink_fraction < 1.0 && image_width > 0 && image_height > 0;
}

FlowField load_flow_field(const std::filesystem::path& path) {
  File file(path, "rb");
  float magic = 0.0f;
  read_exact(file.f, &magic, 4, path);
  if (magic != kFloMagic) {
    throw FormatError("bad .flo magic in " + path.string());
  }
  std::int32_t w = 0, h = 0;
  read_exact(file.f, &w, 4, path);
  read_exact(file.f, &h, 4, path);
  if (w <= 0 || h <= 0 || w > 100000 || h > 100000) {
    throw FormatError("bad .flo dimensions in " + path.string());
  }
  FlowField out;
  out.u.width = out.v.width = w;
  out.u.height = out.v.height = h;
  out.u.values.resize(std::size_t(w) * h);
  out.v.values.resize(std::size_t(w) * h);
  std::vector<float> row(std::size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    read_exact(file.f, row.data(), row.size() * 4, path);
    for (int x = 0; x < w; ++x) {
      out.u.values[std::size_t(y) * w + x] = row[2 * x];
      out.v.values[std::size_t(y) * w + x] = row[2 * x + 1];
    }
  }
  return out;
}

void save_flow_field(const std::filesystem::path& path, const FlowField& f) {
  if (!f.u.valid() || !f.v.valid() || f.u.width != f.v.width ||
      f.u.height != f.v.height) {
    throw std::invalid_argument("save_flow_field: inconsistent flow field");
  }
  File file(path, "wb");
  write_exact(file.f, &kFloMagic, 4, path);
  const std::int32_t w = f.u.width, h = f.u.height;
  write_exact(file.f, &w, 4, path);
  write_exact(file.f, &h, 4, path);
  std::vector<float> row(std::size_t(w) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[2 * x] = f.u.values[std::size_t(y) * w + x];
      row[2 * x + 1] = f.v.values[std::size_t(y) * w + x];
    }
    write_exact(file.f, row.data(), row.size() * 4, path);
  }
}

namespace {

std::string pfm_token(std::FILE* f, const std::filesystem::path& p) {
  std::string tok;
  int c;
  while ((c = std::fgetc(f)) != EOF && std::isspace(c)) {
  }
  if (c == EOF) throw FormatError("truncated PFM header in " + p.string());
  tok.push_back(char(c));
  while ((c = std::fgetc(f)) != EOF && !std::isspace(c)) tok.push_back(char(c));
  if (c == EOF) throw FormatError("truncated PFM header in " + p.string());
  return tok;
}

}  // namespace

DenseMap load_disparity_map(const std::filesystem::path& path) {
  File file(path, "rb");
  const std::string tag = pfm_token(file.f, path);
  if (tag == "PF") {
    throw FormatError("color PFM unsupported: " + path.string());
  }
  if (tag != "Pf") throw FormatError("bad PFM header in " + path.string());
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(pfm_token(file.f, path));
    h = std::stoi(pfm_token(file.f, path));
    scale = std::stod(pfm_token(file.f, path));
  } catch (const std::logic_error&) {
    throw FormatError("bad PFM header field in " + path.string());
  }
  if (w <= 0 || h <= 0) {
    throw FormatError("bad PFM dimensions in " + path.string());
  }
  const bool little_endian = scale < 0.0;
  DenseMap m;
  m.width = w;
  m.height = h;
  m.values.resize(std::size_t(w) * h);
  // rows are stored bottom-up
  for (int y = h - 1; y >= 0; --y) {
    read_exact(file.f, m.values.data() + std::size_t(y) * w, std::size_t(w) * 4,
               path);
  }
  if (!little_endian) {
    for (float& v : m.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(&v, &bits, 4);
    }
  }
  return m;
}

void save_disparity_map(const std::filesystem::path& path, const DenseMap& m) {
  if (!m.valid()) throw std::invalid_argument("save_disparity_map: bad map");
  File file(path, "wb");
  char header[64];
  const int len =
      std::snprintf(header, sizeof header, "Pf\n%d %d\n-1.0\n", m.width,
                    m.height);
  write_exact(file.f, header, std::size_t(len), path);
  for (int y = m.height - 1; y >= 0; --y) {
    write_exact(file.f, m.values.data() + std::size_t(y) * m.width,
                std::size_t(m.width) * 4, path);
  }
}

double aggregate_in_box(const DenseMap& m, const BoundingBox& b,
                        int video_width, int video_height,
                        double shrink_fraction) {
  if (!m.valid()) throw std::invalid_argument("aggregate_in_box: bad map");
  if (!b.valid()) throw std::invalid_argument("aggregate_in_box: bad box");
  if (b.x + b.w <= 0.0 || b.y + b.h <= 0.0 || b.x >= video_width ||
      b.y >= video_height) {
    throw std::invalid_argument("aggregate_in_box: box outside the frame");
  }
  const double sx = double(m.width) / video_width;
  const double sy = double(m.height) / video_height;
  const BoundingBox scaled{b.x * sx, b.y * sy, b.w * sx, b.h * sy};
  const BoundingBox s = shrink_box(scaled, shrink_fraction);

  const int x_begin = std::max(0, int(std::ceil(s.x - 0.5)));
  const int x_end = std::min(m.width, int(std::ceil(s.x + s.w - 0.5)));
  const int y_begin = std::max(0, int(std::ceil(s.y - 0.5)));
  const int y_end = std::min(m.height, int(std::ceil(s.y + s.h - 0.5)));

  double sum = 0.0;
  std::int64_t count = 0;
  for (int y = y_begin; y < y_end; ++y) {
    for (int x = x_begin; x < x_end; ++x) {
      sum += m.cell(x, y);
      ++count;
    }
  }
  if (count == 0) {
    // tiny far-range box: fall back to its center
    return m.sample(std::clamp(s.cx(), 0.0, double(m.width)),
                    std::clamp(s.cy(), 0.0, double(m.height)));
  }
  return sum / double(count);
}

std::vector<double> gaussian_smooth(const std::vector<double>& s, int taps,
                                    double sigma) {
  if (taps < 1 || taps % 2 == 0) {
    throw std::invalid_argument("gaussian_smooth: taps must be odd");
  }
  if (s.empty()) throw std::invalid_argument("gaussian_smooth: empty series");
  const int half = taps / 2;
  std::vector<double> kernel(taps);
  double norm = 0.0;
  for (int k = -half; k <= half; ++k) {
    kernel[k + half] = std::exp(-double(k) * k / (2.0 * sigma * sigma));
    norm += kernel[k + half];
  }
  for (double& v : kernel) v /= norm;

  const int n = int(s.size());
  std::vector<double> out(s.size());
  for (int i = 0; i < n; ++i) {
    // difference form of the unit-sum convolution: constants pass through
    // bit-exactly
    double acc = 0.0;
    for (int k = -half; k <= half; ++k) {
      const int j = std::clamp(i + k, 0, n - 1);  // edge replication
      acc += kernel[k + half] * (s[j] - s[i]);
    }
    out[i] = s[i] + acc;
  }
  return out;
}

CueSeries gaussian_smooth(const CueSeries& s, int taps, double sigma) {
  return {s.channel, gaussian_smooth(s.values, taps, sigma)};
}

std::size_t feature_length(const FeatureConfig& cfg, std::size_t frames) {
  if (frames == 0) return 0;
  const std::size_t samples = (frames - 1) / std::size_t(cfg.frame_skip) + 1;
  std::size_t per = 4;
  if (cfg.include_flow) per += 2;
  if (cfg.include_depth) per += 1;
  return samples * per + 1;
}

FeatureVector assemble_features(const Track& track,
                                const std::vector<FlowField>* flow,
                                const std::vector<DenseMap>* depth,
                                const FeatureConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("assemble_features: bad config");
  const std::size_t n = track.boxes.size();
  if (n == 0) throw std::invalid_argument("assemble_features: empty track");
  if (cfg.include_flow) {
    if (!flow || flow->size() != n - 1) {
      throw std::invalid_argument(
          "assemble_features: flow map count must be frames - 1");
    }
  }
  if (cfg.include_depth) {
    if (!depth || depth->size() != n) {
      throw std::invalid_argument(
          "assemble_features: depth map count must equal frames");
    }
  }

  const double W = cfg.image_width;
  const double H = cfg.image_height;

  std::vector<double> u_series, v_series, d_series;
  if (cfg.include_flow) {
    u_series.resize(n);
    v_series.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      // flow map t covers t -> t+1; the last frame reuses the final map
      const std::size_t idx = std::min(t, n - 2);
      u_series[t] = aggregate_in_box((*flow)[idx].u, track.boxes[t],
                                     cfg.image_width, cfg.image_height,
                                     cfg.shrink_fraction);
      v_series[t] = aggregate_in_box((*flow)[idx].v, track.boxes[t],
                                     cfg.image_width, cfg.image_height,
                                     cfg.shrink_fraction);
    }
    u_series = gaussian_smooth(u_series, cfg.gaussian_taps, cfg.gaussian_sigma);
    v_series = gaussian_smooth(v_series, cfg.gaussian_taps, cfg.gaussian_sigma);
  }
  if (cfg.include_depth) {
    d_series.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
      d_series[t] = aggregate_in_box((*depth)[t], track.boxes[t],
                                     cfg.image_width, cfg.image_height,
                                     cfg.shrink_fraction);
    }
    d_series = gaussian_smooth(d_series, cfg.gaussian_taps, cfg.gaussian_sigma);
  }

  FeatureVector fv;
  fv.values.reserve(feature_length(cfg, n));
  for (std::size_t off = 0;; off += std::size_t(cfg.frame_skip)) {
    if (off >= n) break;
    const std::size_t t = n - 1 - off;
    const BoundingBox& box = track.boxes[t];
    fv.values.push_back(box.cx() / W);
    fv.values.push_back(box.cy() / H);
    fv.values.push_back(box.w / W);
    fv.values.push_back(box.h / H);
    if (cfg.include_flow) {
      fv.values.push_back(u_series[t]);
      fv.values.push_back(v_series[t]);
    }
    if (cfg.include_depth) {
      fv.values.push_back(d_series[t]);
    }
    if (t == 0) break;
  }
  fv.values.push_back(box_area(track.boxes.back()) / (W * H));
  return fv;
}

}  // namespace velo
