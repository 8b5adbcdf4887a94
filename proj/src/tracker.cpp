#include "velo/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "velo/kernels.hpp"

namespace velo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// mean-of-two-central-values convention for even counts
double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n % 2 == 1) {
    std::nth_element(v.begin(), v.begin() + n / 2, v.end());
    return v[n / 2];
  }
  std::nth_element(v.begin(), v.begin() + n / 2 - 1, v.end());
  const double lo = v[n / 2 - 1];
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  return 0.5 * (lo + v[n / 2]);
}

void downsample2(const ImageFrame& src, ImageFrame& dst) {
  static const float wts[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16,
                               1.0f / 16};
  const auto& k = kernels::active();
  const int w = src.width, h = src.height;
  dst.width = (w + 1) / 2;
  dst.height = (h + 1) / 2;
  dst.intensity.resize(std::size_t(dst.width) * dst.height);
  std::vector<float> tmp(static_cast<std::size_t>(w));
  for (int oy = 0; oy < dst.height; ++oy) {
    const float* rows[5];
    for (int t = 0; t < 5; ++t) {
      rows[t] = src.row(std::clamp(2 * oy + t - 2, 0, h - 1));
    }
    k.row_mix5_f32(rows, wts, tmp.data(), std::size_t(w));
    k.decimate5_f32(tmp.data(), w, wts, dst.row(oy), dst.width);
  }
}

struct Solve2x2 {
  double sxx, sxy, syy;
  double min_eig() const {
    const double tr = sxx + syy;
    const double d = std::sqrt((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy);
    return 0.5 * (tr - d);
  }
  void solve(double bx, double by, double& ox, double& oy) const {
    const double det = sxx * syy - sxy * sxy;
    ox = (syy * bx - sxy * by) / det;
    oy = (sxx * by - sxy * bx) / det;
  }
};

double zncc(const float* a, const float* b, std::size_t n) {
  double s[5];
  kernels::active().sums5_f32(a, b, n, s);
  const double inv_n = 1.0 / double(n);
  const double var_a = s[2] - s[0] * s[0] * inv_n;
  const double var_b = s[3] - s[1] * s[1] * inv_n;
  if (var_a <= 1e-12 || var_b <= 1e-12) return 0.0;
  const double cov = s[4] - s[0] * s[1] * inv_n;
  return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

bool overlaps_image(const BoundingBox& b, int w, int h) {
  return b.x + b.w > 0.0 && b.y + b.h > 0.0 && b.x < double(w) &&
         b.y < double(h);
}

}  // namespace

bool TrackerConfig::valid() const {
  return grid >= 2 && pyramid_levels >= 1 && lk_window >= 3 &&
         lk_window % 2 == 1 && lk_max_iterations >= 1 && lk_epsilon > 0.0 &&
         keep_fraction > 0.0 && keep_fraction <= 1.0 &&
         failure_fb_threshold > 0.0 && ncc_search_radius >= 1;
}

ImagePyramid build_pyramid(const ImageFrame& frame, int levels) {
  if (levels < 1) throw std::invalid_argument("build_pyramid: levels >= 1");
  if (!frame.valid()) throw std::invalid_argument("build_pyramid: bad frame");
  const int need = 1 << (levels - 1);
  if (frame.width < need || frame.height < need) {
    throw std::invalid_argument("build_pyramid: frame too small for levels");
  }
  ImagePyramid p;
  p.levels.resize(std::size_t(levels));
  p.levels[0] = frame;
  for (int l = 1; l < levels; ++l) {
    downsample2(p.levels[l - 1], p.levels[l]);
  }
  return p;
}

LkResult lk_track_point(const ImagePyramid& prev, const ImagePyramid& next,
                        double px, double py, const TrackerConfig& cfg) {
  if (prev.levels.empty() || next.levels.empty() ||
      prev.levels.size() != next.levels.size()) {
    throw std::invalid_argument("lk_track_point: mismatched pyramids");
  }
  const ImageFrame& base = prev.levels[0];
  if (!(px >= 0.0 && px < base.width && py >= 0.0 && py < base.height)) {
    throw std::invalid_argument("lk_track_point: point outside image");
  }

  const auto& k = kernels::active();
  const int win = cfg.lk_window;
  const int pad = win + 2;
  const std::size_t wn = std::size_t(win) * win;
  std::vector<float> padded(std::size_t(pad) * pad);
  std::vector<float> tmpl(wn), gx(wn), gy(wn), probe(wn);

  const int levels = int(prev.levels.size());
  double dx = 0.0, dy = 0.0;  // displacement in current level coordinates
  bool converged = true;

  for (int l = levels - 1; l >= 0; --l) {
    const ImageFrame& a = prev.levels[std::size_t(l)];
    const ImageFrame& b = next.levels[std::size_t(l)];
    const double scale = double(1 << l);
    const double cx = px / scale;
    const double cy = py / scale;

    k.patch_bilinear_f32(a.intensity.data(), a.width, a.height, cx, cy, pad,
                         padded.data());
    for (int j = 0; j < win; ++j) {
      const float* r0 = padded.data() + std::size_t(j) * pad;      // row j
      const float* r1 = r0 + pad;                                  // row j+1
      const float* r2 = r1 + pad;                                  // row j+2
      float* t = tmpl.data() + std::size_t(j) * win;
      float* ix = gx.data() + std::size_t(j) * win;
      float* iy = gy.data() + std::size_t(j) * win;
      for (int i = 0; i < win; ++i) {
        t[i] = r1[i + 1];
        ix[i] = 0.5f * (r1[i + 2] - r1[i]);
        iy[i] = 0.5f * (r2[i + 1] - r0[i + 1]);
      }
    }

    double m[3];
    k.grad_moments_f32(gx.data(), gy.data(), wn, m);
    const Solve2x2 sys{m[0], m[1], m[2]};
    // degeneracy floor: 1e-4 of the window size, just above the gradient
    // noise of 8-bit quantization on [0,1] intensities
    if (sys.min_eig() < 1e-4 * double(win)) {
      converged = false;  // textureless window, no solvable system
      break;
    }

    for (int it = 0; it < cfg.lk_max_iterations; ++it) {
      const double qx = cx + dx;
      const double qy = cy + dy;
      if (!(qx >= 0.0 && qx < b.width && qy >= 0.0 && qy < b.height)) {
        converged = false;
        break;
      }
      k.patch_bilinear_f32(b.intensity.data(), b.width, b.height, qx, qy, win,
                           probe.data());
      double rhs[2];
      k.flow_rhs_f32(gx.data(), gy.data(), tmpl.data(), probe.data(), wn, rhs);
      double sx, sy;
      sys.solve(rhs[0], rhs[1], sx, sy);
      dx += sx;
      dy += sy;
      if (std::hypot(sx, sy) < cfg.lk_epsilon) break;
    }
    if (!converged) break;
    if (l > 0) {
      dx *= 2.0;
      dy *= 2.0;
    }
  }

  LkResult r;
  r.converged = converged;
  if (!converged) {
    r.x = px;
    r.y = py;
    return r;
  }
  r.x = px + dx;
  r.y = py + dy;
  if (!(r.x >= 0.0 && r.x < base.width && r.y >= 0.0 && r.y < base.height)) {
    r.converged = false;
  }
  return r;
}

std::vector<PointTrack> median_flow_points(const ImagePyramid& prev,
                                           const ImagePyramid& next,
                                           const BoundingBox& b,
                                           const TrackerConfig& cfg) {
  const ImageFrame& base = prev.levels.at(0);
  const int win = cfg.lk_window;
  const std::size_t wn = std::size_t(win) * win;
  std::vector<float> pa(wn), pb(wn);

  std::vector<PointTrack> out;
  out.reserve(std::size_t(cfg.grid) * cfg.grid);
  for (int gy = 0; gy < cfg.grid; ++gy) {
    for (int gx = 0; gx < cfg.grid; ++gx) {
      PointTrack pt;
      // half-cell margin keeps LK windows on the object
      pt.start_x = b.x + (gx + 0.5) * b.w / cfg.grid;
      pt.start_y = b.y + (gy + 0.5) * b.h / cfg.grid;
      pt.fb_error = kInf;
      if (!(pt.start_x >= 0.0 && pt.start_x < base.width &&
            pt.start_y >= 0.0 && pt.start_y < base.height)) {
        out.push_back(pt);
        continue;
      }
      const LkResult fwd =
          lk_track_point(prev, next, pt.start_x, pt.start_y, cfg);
      pt.forward_x = fwd.x;
      pt.forward_y = fwd.y;
      if (!fwd.converged) {
        out.push_back(pt);
        continue;
      }
      const LkResult bwd = lk_track_point(next, prev, fwd.x, fwd.y, cfg);
      pt.backward_x = bwd.x;
      pt.backward_y = bwd.y;
      if (!bwd.converged) {
        out.push_back(pt);
        continue;
      }
      pt.converged = true;
      pt.fb_error =
          std::hypot(pt.start_x - bwd.x, pt.start_y - bwd.y);
      const auto& k = kernels::active();
      k.patch_bilinear_f32(base.intensity.data(), base.width, base.height,
                           pt.start_x, pt.start_y, win, pa.data());
      const ImageFrame& nbase = next.levels[0];
      k.patch_bilinear_f32(nbase.intensity.data(), nbase.width, nbase.height,
                           fwd.x, fwd.y, win, pb.data());
      pt.ncc = zncc(pa.data(), pb.data(), wn);
      out.push_back(pt);
    }
  }
  return out;
}

MedianFlowResult median_flow_step(const ImagePyramid& prev,
                                  const ImagePyramid& next,
                                  const BoundingBox& b,
                                  const TrackerConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("median_flow_step: bad config");
  if (!b.valid()) throw std::invalid_argument("median_flow_step: invalid box");
  const ImageFrame& base = prev.levels.at(0);
  if (!overlaps_image(b, base.width, base.height)) {
    throw std::invalid_argument("median_flow_step: box off image");
  }

  const std::vector<PointTrack> pts = median_flow_points(prev, next, b, cfg);

  std::vector<const PointTrack*> good;
  good.reserve(pts.size());
  for (const PointTrack& p : pts) {
    if (p.converged) good.push_back(&p);
  }
  if (good.size() < 4) return MedianFlowFailure{};

  const std::size_t m = good.size();
  const std::size_t keep =
      std::max<std::size_t>(1, std::size_t(std::floor(cfg.keep_fraction * m)));
  std::vector<double> fbs(m), nccs(m);
  for (std::size_t i = 0; i < m; ++i) {
    fbs[i] = good[i]->fb_error;
    nccs[i] = good[i]->ncc;
  }
  std::vector<double> tmp = fbs;
  std::nth_element(tmp.begin(), tmp.begin() + (keep - 1), tmp.end());
  const double fb_cut = tmp[keep - 1];
  tmp = nccs;
  std::nth_element(tmp.begin(), tmp.begin() + (m - keep), tmp.end());
  const double ncc_cut = tmp[m - keep];

  std::vector<const PointTrack*> kept;
  kept.reserve(m);
  for (const PointTrack* p : good) {
    if (p->fb_error <= fb_cut && p->ncc >= ncc_cut) kept.push_back(p);
  }
  if (kept.size() < 4) return MedianFlowFailure{};

  std::vector<double> vals(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) vals[i] = kept[i]->fb_error;
  if (median_of(vals) > cfg.failure_fb_threshold) return MedianFlowFailure{};

  for (std::size_t i = 0; i < kept.size(); ++i) {
    vals[i] = kept[i]->forward_x - kept[i]->start_x;
  }
  const double mdx = median_of(vals);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    vals[i] = kept[i]->forward_y - kept[i]->start_y;
  }
  const double mdy = median_of(vals);

  std::vector<double> ratios;
  ratios.reserve(kept.size() * (kept.size() - 1) / 2);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double od = std::hypot(kept[i]->start_x - kept[j]->start_x,
                                   kept[i]->start_y - kept[j]->start_y);
      if (od < 1e-12) continue;
      const double nd = std::hypot(kept[i]->forward_x - kept[j]->forward_x,
                                   kept[i]->forward_y - kept[j]->forward_y);
      ratios.push_back(nd / od);
    }
  }
  const double scale = ratios.empty() ? 1.0 : median_of(ratios);
  if (!(scale > 1e-6)) return MedianFlowFailure{};

  // delta form: a zero shift with unit scale reproduces the box bit-exactly
  BoundingBox nb;
  nb.w = b.w * scale;
  nb.h = b.h * scale;
  nb.x = b.x + mdx + (b.w - nb.w) * 0.5;
  nb.y = b.y + mdy + (b.h - nb.h) * 0.5;
  return nb;
}

MedianFlowResult median_flow_step(const ImageFrame& prev,
                                  const ImageFrame& next, const BoundingBox& b,
                                  const TrackerConfig& cfg) {
  const ImagePyramid pp = build_pyramid(prev, cfg.pyramid_levels);
  const ImagePyramid np = build_pyramid(next, cfg.pyramid_levels);
  return median_flow_step(pp, np, b, cfg);
}

NccStepResult ncc_fallback_step(const ImageFrame& prev, const ImageFrame& next,
                                const BoundingBox& b,
                                const TrackerConfig& cfg) {
  if (!cfg.valid()) {
    throw std::invalid_argument("ncc_fallback_step: bad config");
  }
  if (!b.valid()) throw std::invalid_argument("ncc_fallback_step: invalid box");

  const int w = prev.width, h = prev.height;
  const int tx = int(std::lround(b.x));
  const int ty = int(std::lround(b.y));
  const int tw = std::max(1, int(std::lround(b.w)));
  const int th = std::max(1, int(std::lround(b.h)));
  if (tx + tw <= 0 || ty + th <= 0 || tx >= w || ty >= h) {
    return {b, true};  // template fully off-image
  }
  const bool partial = tx < 0 || ty < 0 || tx + tw > w || ty + th > h;

  const std::size_t n = std::size_t(tw) * th;
  std::vector<float> tmpl(n), probe(n);
  for (int j = 0; j < th; ++j) {
    for (int i = 0; i < tw; ++i) {
      tmpl[std::size_t(j) * tw + i] = prev.at(tx + i, ty + j);
    }
  }

  const int r = cfg.ncc_search_radius;
  const auto score_at = [&](int dx, int dy) {
    for (int j = 0; j < th; ++j) {
      for (int i = 0; i < tw; ++i) {
        probe[std::size_t(j) * tw + i] = next.at(tx + dx + i, ty + dy + j);
      }
    }
    return zncc(tmpl.data(), probe.data(), n);
  };

  int best_dx = 0, best_dy = 0;
  double best = score_at(0, 0);
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const double s = score_at(dx, dy);
      if (s > best) {
        best = s;
        best_dx = dx;
        best_dy = dy;
      }
    }
  }

  NccStepResult out;
  out.box = BoundingBox{b.x + best_dx, b.y + best_dy, b.w, b.h};
  out.clipped =
      partial || std::abs(best_dx) == r || std::abs(best_dy) == r;
  return out;
}

Track track_vehicle(const VideoSequence& seq, const BoundingBox& last_box,
                    const TrackerConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("track_vehicle: bad config");
  if (seq.frames.empty()) {
    throw std::invalid_argument("track_vehicle: empty sequence");
  }
  if (!last_box.valid()) {
    throw std::invalid_argument("track_vehicle: invalid box");
  }
  const int w = seq.width(), h = seq.height();
  if (!overlaps_image(last_box, w, h)) {
    throw std::invalid_argument("track_vehicle: box off the last frame");
  }

  const std::size_t n = seq.frames.size();
  Track tr;
  tr.boxes.resize(n);
  tr.source.assign(n, TrackSource::MedianFlow);
  tr.clipped.assign(n, 0);
  tr.boxes[n - 1] = last_box;

  ImagePyramid cur = build_pyramid(seq.frames[n - 1], cfg.pyramid_levels);
  for (std::size_t t = n - 1; t > 0; --t) {
    ImagePyramid target = build_pyramid(seq.frames[t - 1], cfg.pyramid_levels);
    const BoundingBox& box = tr.boxes[t];
    bool fell_back = true;
    if (overlaps_image(box, w, h)) {
      const MedianFlowResult res = median_flow_step(cur, target, box, cfg);
      if (const BoundingBox* nb = std::get_if<BoundingBox>(&res)) {
        tr.boxes[t - 1] = *nb;
        fell_back = false;
      }
    }
    if (fell_back) {
      if (overlaps_image(box, w, h)) {
        const NccStepResult fb =
            ncc_fallback_step(seq.frames[t], seq.frames[t - 1], box, cfg);
        tr.boxes[t - 1] = fb.box;
        tr.clipped[t - 1] = fb.clipped ? 1 : 0;
      } else {
        tr.boxes[t - 1] = box;  // drifted off-image, keep it
        tr.clipped[t - 1] = 1;
      }
      tr.source[t - 1] = TrackSource::Fallback;
    }
    cur = std::move(target);
  }
  return tr;
}

}  // namespace velo
