#include "velo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace velo {

bool BoundingBox::valid() const {
  return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y) &&
         std::isfinite(w) && std::isfinite(h);
}

BoundingBox shrink_box(const BoundingBox& b, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("shrink_box: fraction must be in [0, 1)");
  }
  if (!b.valid()) throw std::invalid_argument("shrink_box: invalid box");
  // Center-preserving form: the new corner is the old corner shifted by half
  // the trimmed amount, so fraction == 0 reproduces the box bit-exactly.
  const double dw = b.w * fraction;
  const double dh = b.h * fraction;
  return {b.x + dw * 0.5, b.y + dh * 0.5, b.w - dw, b.h - dh};
}

double box_area(const BoundingBox& b) {
  if (!b.valid()) throw std::invalid_argument("box_area: invalid box");
  return b.w * b.h;
}

const char* to_string(RangeClass c) {
  switch (c) {
    case RangeClass::Near:
      return "near";
    case RangeClass::Medium:
      return "medium";
    case RangeClass::Far:
      return "far";
  }
  return "?";
}

std::optional<RangeClass> range_from_string(const std::string& s) {
  if (s == "near") return RangeClass::Near;
  if (s == "medium") return RangeClass::Medium;
  if (s == "far") return RangeClass::Far;
  return std::nullopt;
}

RangeClass classify_range_by_distance(double d) {
  if (!(d >= 0.0)) {
    throw std::invalid_argument("classify_range_by_distance: d must be >= 0");
  }
  if (d < 20.0) return RangeClass::Near;
  if (d < 45.0) return RangeClass::Medium;
  return RangeClass::Far;
}

ImageFrame ImageFrame::filled(int w, int h, float value) {
  ImageFrame f;
  f.width = w;
  f.height = h;
  f.intensity.assign(std::size_t(w) * h, value);
  return f;
}

float ImageFrame::at(int x, int y) const {
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return intensity[std::size_t(y) * width + x];
}

float ImageFrame::sample(double x, double y) const {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const float ax = float(x - fx);
  const float ay = float(y - fy);
  const int x0 = int(fx);
  const int y0 = int(fy);
  const float p00 = at(x0, y0);
  const float p01 = at(x0 + 1, y0);
  const float p10 = at(x0, y0 + 1);
  const float p11 = at(x0 + 1, y0 + 1);
  return (1.0f - ay) * ((1.0f - ax) * p00 + ax * p01) +
         ay * ((1.0f - ax) * p10 + ax * p11);
}

bool ImageFrame::valid() const {
  return width > 0 && height > 0 &&
         intensity.size() == std::size_t(width) * height;
}

float luma(float r, float g, float b) {
  return 0.299f * r + 0.587f * g + 0.114f * b;
}

std::optional<double> VehicleAnnotation::distance() const {
  if (!position) return std::nullopt;
  return std::hypot((*position)[0], (*position)[1]);
}

}  // namespace velo
