#include "velo/synthcam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "velo/dataset_io.hpp"
#include "velo/parallel.hpp"
#include "velo/rng.hpp"

namespace velo {

namespace {

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h =
      mix_seed(seed, std::uint64_t(ix) * 0x9e3779b97f4a7c15ull,
               std::uint64_t(iy));
  return double(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// seeded value noise in [0, 1]
double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const std::int64_t ix = std::int64_t(fx);
  const std::int64_t iy = std::int64_t(fy);
  const double tx = smoothstep(x - fx);
  const double ty = smoothstep(y - fy);
  const double a = lattice(seed, ix, iy);
  const double b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1);
  const double d = lattice(seed, ix + 1, iy + 1);
  return (1.0 - ty) * ((1.0 - tx) * a + tx * b) +
         ty * ((1.0 - tx) * c + tx * d);
}

// two octaves, output in [0, 1]
double texture(std::uint64_t seed, double x, double y) {
  return 0.65 * value_noise(seed, x, y) +
         0.35 * value_noise(mix_seed(seed, 1), x * 2.7, y * 2.7);
}

// vehicle billboards carry a third, fine octave: a close-range car shows
// grille/plate-scale detail, and LK needs local gradient energy inside an
// 11 px window even when the box spans hundreds of pixels
double vehicle_texture(std::uint64_t seed, double x, double y) {
  return 0.50 * value_noise(seed, x, y) +
         0.30 * value_noise(mix_seed(seed, 1), x * 2.7, y * 2.7) +
         0.20 * value_noise(mix_seed(seed, 2), x * 7.3, y * 7.3);
}

struct VehicleState {
  double x, z;
};

VehicleState state_at(const VehicleSpec& v, double t_seconds) {
  return {v.x0 + v.vx * t_seconds, v.z0 + v.vz * t_seconds};
}

float quantize8(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return float(std::lround(c * 255.0)) / 255.0f;
}

void fill_box_texture(ImageFrame& frame, const BoundingBox& box,
                      std::uint64_t seed, double lo, double hi) {
  // texture coordinates are tied to the box, so the pattern moves and
  // rescales rigidly with the vehicle
  const int x_begin = std::max(0, int(std::ceil(box.x - 0.5)));
  const int x_end = std::min(frame.width, int(std::ceil(box.x + box.w - 0.5)));
  const int y_begin = std::max(0, int(std::ceil(box.y - 0.5)));
  const int y_end = std::min(frame.height, int(std::ceil(box.y + box.h - 0.5)));
  for (int py = y_begin; py < y_end; ++py) {
    for (int px = x_begin; px < x_end; ++px) {
      const double u = (px + 0.5 - box.x) / box.w;
      const double v = (py + 0.5 - box.y) / box.h;
      const double n = vehicle_texture(seed, u * 10.0, v * 7.0);
      frame.px(px, py) = float(lo + (hi - lo) * n);
    }
  }
}

void fill_box_constant(ImageFrame& frame, const BoundingBox& box, float value) {
  const int x_begin = std::max(0, int(std::ceil(box.x - 0.5)));
  const int x_end = std::min(frame.width, int(std::ceil(box.x + box.w - 0.5)));
  const int y_begin = std::max(0, int(std::ceil(box.y - 0.5)));
  const int y_end = std::min(frame.height, int(std::ceil(box.y + box.h - 0.5)));
  for (int py = y_begin; py < y_end; ++py) {
    for (int px = x_begin; px < x_end; ++px) frame.px(px, py) = value;
  }
}

}  // namespace

SceneSpec SceneSpec::with_defaults(int w, int h, double focal) {
  SceneSpec s;
  s.image_width = w;
  s.image_height = h;
  s.intrinsics = {focal, w / 2.0, h / 2.0};
  return s;
}

BoundingBox project_vehicle(double x, double z, double width, double height,
                            const CameraIntrinsics& k) {
  if (!(z > 0.0)) {
    throw std::invalid_argument("project_vehicle: z must be > 0");
  }
  const double w = k.f * width / z;
  const double h = k.f * height / z;
  const double cx = k.cx + k.f * x / z;
  const double cy = k.cy;  // vertical centre rides the optical axis
  return {cx - w * 0.5, cy - h * 0.5, w, h};
}

std::pair<VideoSequence, SyntheticGroundTruth> render_sequence(
    const SceneSpec& spec) {
  if (spec.frame_count < 2) {
    throw std::invalid_argument("render_sequence: frame_count must be >= 2");
  }
  if (spec.image_width < 8 || spec.image_height < 8 || !(spec.fps > 0.0)) {
    throw std::invalid_argument("render_sequence: bad image dims or fps");
  }
  for (const VehicleSpec& v : spec.vehicles) {
    for (int t = 0; t < spec.frame_count; ++t) {
      if (!(state_at(v, t / spec.fps).z > 0.0)) {
        throw std::invalid_argument(
            "render_sequence: vehicle leaves z > 0 during the clip");
      }
    }
  }

  const int W = spec.image_width, H = spec.image_height;
  const double span = spec.frame_count - 1;
  // drifting background: render one canvas covering the whole sweep, then
  // sample shifted windows per frame
  const double base_x = std::max(0.0, -spec.bg_drift_x * span);
  const double base_y = std::max(0.0, -spec.bg_drift_y * span);
  const int cw = W + int(std::ceil(std::abs(spec.bg_drift_x) * span)) + 2;
  const int ch = H + int(std::ceil(std::abs(spec.bg_drift_y) * span)) + 2;
  ImageFrame canvas = ImageFrame::filled(cw, ch, 0.0f);
  const std::uint64_t bg_seed = mix_seed(spec.seed, 0xb6ull);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      const double n = texture(bg_seed, x / 9.0, y / 9.0);
      canvas.px(x, y) = float(0.05 + 0.40 * n);
    }
  }

  VideoSequence seq;
  seq.fps = spec.fps;
  seq.sequence_id = spec.sequence_id;
  seq.drive_id = spec.drive_id;
  seq.frames.resize(std::size_t(spec.frame_count));

  SyntheticGroundTruth gt;
  gt.vehicles.resize(spec.vehicles.size());
  for (std::size_t vi = 0; vi < spec.vehicles.size(); ++vi) {
    gt.vehicles[vi].boxes.resize(std::size_t(spec.frame_count));
  }

  for (int t = 0; t < spec.frame_count; ++t) {
    ImageFrame& frame = seq.frames[std::size_t(t)];
    frame.width = W;
    frame.height = H;
    frame.intensity.resize(std::size_t(W) * H);
    const double ox = base_x + spec.bg_drift_x * t;
    const double oy = base_y + spec.bg_drift_y * t;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        frame.px(x, y) = canvas.sample(x + ox, y + oy);
      }
    }
    const double ts = t / spec.fps;

    // far vehicles first so nearer ones overdraw them
    std::vector<std::size_t> order(spec.vehicles.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return state_at(spec.vehicles[a], ts).z > state_at(spec.vehicles[b], ts).z;
    });

    for (const std::size_t vi : order) {
      const VehicleSpec& v = spec.vehicles[vi];
      const VehicleState st = state_at(v, ts);
      const BoundingBox box =
          project_vehicle(st.x, st.z, v.width, v.height, spec.intrinsics);
      gt.vehicles[vi].boxes[std::size_t(t)] = box;
      fill_box_texture(frame, box, mix_seed(v.texture_seed, 0x7e), 0.55, 0.95);
    }

    if (spec.occluder && t >= spec.occluder->start_frame &&
        t < spec.occluder->end_frame) {
      const OccluderSpec& oc = *spec.occluder;
      const std::size_t vi = std::size_t(oc.vehicle);
      if (vi < spec.vehicles.size()) {
        BoundingBox box = gt.vehicles[vi].boxes[std::size_t(t)];
        box.x -= oc.margin_px;
        box.y -= oc.margin_px;
        box.w += 2.0 * oc.margin_px;
        box.h += 2.0 * oc.margin_px;
        fill_box_constant(frame, box, oc.intensity);
      }
    }

    for (float& v : frame.intensity) v = quantize8(v);
  }

  const double t_last = (spec.frame_count - 1) / spec.fps;
  for (std::size_t vi = 0; vi < spec.vehicles.size(); ++vi) {
    const VehicleSpec& v = spec.vehicles[vi];
    const VehicleState last = state_at(v, t_last);
    gt.vehicles[vi].velocity = {v.vx, v.vz};
    gt.vehicles[vi].position = {last.x, last.z};
    gt.vehicles[vi].distance = std::hypot(last.x, last.z);
  }

  // contrast floor keeps LK well-posed on the billboard
  const ImageFrame& last_frame = seq.frames.back();
  double bg_mean = 0.0;
  for (const float v : canvas.intensity) bg_mean += v;
  bg_mean /= double(canvas.intensity.size());
  const bool last_occluded =
      spec.occluder && spec.frame_count - 1 >= spec.occluder->start_frame &&
      spec.frame_count - 1 < spec.occluder->end_frame;
  if (!last_occluded) {
    for (std::size_t vi = 0; vi < spec.vehicles.size(); ++vi) {
      const BoundingBox& box = gt.vehicles[vi].boxes.back();
      const int x0 = std::max(0, int(box.x));
      const int x1 = std::min(W, int(box.x + box.w));
      const int y0 = std::max(0, int(box.y));
      const int y1 = std::min(H, int(box.y + box.h));
      double mean = 0.0;
      std::int64_t cnt = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          mean += last_frame.px(x, y);
          ++cnt;
        }
      }
      if (cnt > 0 && std::abs(mean / double(cnt) - bg_mean) < 0.2) {
        throw std::logic_error("render_sequence: contrast floor violated");
      }
    }
  }

  return {std::move(seq), std::move(gt)};
}

SceneSpec sample_scene_spec(const DistanceProfile& profile, int image_width,
                            int image_height, double focal, std::uint64_t seed,
                            std::uint64_t index, const std::string& sequence_id,
                            const std::string& drive_id) {
  Rng rng(mix_seed(seed, index, 0x5ce11eull));
  SceneSpec spec = SceneSpec::with_defaults(image_width, image_height, focal);
  spec.seed = mix_seed(seed, index, 2);
  spec.sequence_id = sequence_id;
  spec.drive_id = drive_id;

  // ego-motion makes the background sweep a few px/frame; boundary LK
  // windows then disagree with the vehicle and get filtered, as on real road
  // footage
  const double drift_mag = rng.uniform(0.8, 2.2);
  const double drift_dir = rng.u01() < 0.5 ? -1.0 : 1.0;
  spec.bg_drift_x = drift_dir * drift_mag;
  spec.bg_drift_y = rng.uniform(-0.5, 0.5);

  const double r = rng.u01();
  double d_lo, d_hi;
  if (r < profile.p_near) {
    d_lo = profile.near_min;
    d_hi = profile.near_max;
  } else if (r < profile.p_near + profile.p_medium) {
    d_lo = profile.medium_min;
    d_hi = profile.medium_max;
  } else {
    d_lo = profile.far_min;
    d_hi = profile.far_max;
  }
  const double d_last = rng.uniform(d_lo, d_hi);
  const double eta = rng.uniform(-0.10, 0.10);
  const double x_last = eta * d_last;
  const double z_last = std::sqrt(d_last * d_last - x_last * x_last);

  VehicleSpec v;
  v.width = rng.uniform(1.7, 1.9);
  v.height = rng.uniform(1.3, 1.5);
  v.texture_seed = mix_seed(seed, index, 1);

  const int n = spec.frame_count;
  const double span = (n - 1) / spec.fps;
  const double margin = 10.0;

  // relative speeds shrink with distance: a vehicle a few metres ahead in
  // flowing traffic cannot close at full speed without colliding within the
  // clip (time-to-collision floor ~3.5 s)
  const double vz_cap = std::min(6.0, d_last / 4.5);
  const double vx_cap = std::min(1.5, d_last / 10.0);

  bool placed = false;
  for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
    const double vx = rng.uniform(-vx_cap, vx_cap);
    const double vz = rng.uniform(-vz_cap, vz_cap);
    bool ok = true;
    for (int t = 0; t < n && ok; ++t) {
      const double back = span - t / spec.fps;  // seconds before the last frame
      const double x = x_last - vx * back;
      const double z = z_last - vz * back;
      if (z < 4.0) {
        ok = false;
        break;
      }
      const BoundingBox b =
          project_vehicle(x, z, v.width, v.height, spec.intrinsics);
      if (b.x < margin || b.y < margin || b.x + b.w > image_width - margin ||
          b.y + b.h > image_height - margin || b.w > 0.55 * image_width) {
        ok = false;
      }
    }
    if (ok) {
      v.vx = vx;
      v.vz = vz;
      placed = true;
    }
  }
  if (!placed) {
    v.vx = 0.0;
    v.vz = 0.0;
  }
  v.x0 = x_last - v.vx * span;
  v.z0 = z_last - v.vz * span;

  spec.vehicles.push_back(v);
  return spec;
}

void generate_dataset(int n_sequences, const DistanceProfile& profile,
                      std::uint64_t seed, const std::filesystem::path& out_dir,
                      int jobs) {
  if (n_sequences < 1) {
    throw std::invalid_argument("generate_dataset: n must be >= 1");
  }
  std::filesystem::create_directories(out_dir / "frames");

  parallel_for(std::size_t(n_sequences), jobs, [&](std::size_t i) {
    char sid[32];
    std::snprintf(sid, sizeof sid, "seq%04zu", i);
    const std::string sequence_id = sid;
    const std::string drive_id = "drive" + std::to_string(i / 6);

    const SceneSpec spec = sample_scene_spec(profile, 1280, 720, 1200.0, seed,
                                             i, sequence_id, drive_id);
    auto [seq, gt] = render_sequence(spec);

    const std::filesystem::path frame_dir = out_dir / "frames" / sequence_id;
    std::filesystem::create_directories(frame_dir);

    SequenceManifest m;
    m.sequence_id = sequence_id;
    m.drive_id = drive_id;
    m.fps = spec.fps;
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      char fname[32];
      std::snprintf(fname, sizeof fname, "f%04zu.pgm", t);
      save_pgm(frame_dir / fname, seq.frames[t]);
      m.frame_files.push_back("frames/" + sequence_id + "/" + fname);
    }
    for (const VehicleGroundTruth& v : gt.vehicles) {
      VehicleAnnotation ann;
      ann.last_frame_box = v.boxes.back();
      ann.velocity = v.velocity;
      ann.position = v.position;
      m.annotations.push_back(std::move(ann));
    }
    save_manifest(out_dir / (sequence_id + ".manifest.json"), m);
    save_ground_truth(out_dir / (sequence_id + ".gt.json"), sequence_id, gt);
  });
}

}  // namespace velo
