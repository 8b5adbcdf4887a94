#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace velo {

// Axis-aligned pixel rectangle. Coordinates are real-valued; rasterization
// happens only when sampling pixels.
struct BoundingBox {
  double x = 0.0;  // left edge
  double y = 0.0;  // top edge
  double w = 0.0;
  double h = 0.0;

  double cx() const { return x + w * 0.5; }
  double cy() const { return y + h * 0.5; }
  bool valid() const;
};

// Same center, dimensions scaled by (1 - fraction). fraction in [0, 1).
BoundingBox shrink_box(const BoundingBox& b, double fraction);

double box_area(const BoundingBox& b);

enum class RangeClass { Near, Medium, Far };

const char* to_string(RangeClass c);
std::optional<RangeClass> range_from_string(const std::string& s);

// d < 20 -> Near, 20 <= d < 45 -> Medium, d >= 45 -> Far.
RangeClass classify_range_by_distance(double d);

// Grayscale frame, intensities in [0, 1], row-major.
struct ImageFrame {
  int width = 0;
  int height = 0;
  std::vector<float> intensity;

  static ImageFrame filled(int w, int h, float value);

  float at(int x, int y) const;          // clamped integer access
  float sample(double x, double y) const;  // clamped bilinear access
  float& px(int x, int y) { return intensity[std::size_t(y) * width + x]; }
  float px(int x, int y) const { return intensity[std::size_t(y) * width + x]; }
  const float* row(int y) const { return intensity.data() + std::size_t(y) * width; }
  float* row(int y) { return intensity.data() + std::size_t(y) * width; }
  bool valid() const;
};

// Fixed luma definition used everywhere a color input is reduced to the
// tracker's grayscale space: 0.299 R + 0.587 G + 0.114 B, inputs in [0,1].
float luma(float r, float g, float b);

struct VideoSequence {
  std::vector<ImageFrame> frames;
  double fps = 20.0;
  std::string sequence_id;
  std::string drive_id;

  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
};

struct VehicleAnnotation {
  BoundingBox last_frame_box;
  std::optional<std::array<double, 2>> velocity;  // (vx, vy) m/s
  std::optional<std::array<double, 2>> position;  // (px, py) m

  // Euclidean norm of position when present.
  std::optional<double> distance() const;
};

}  // namespace velo
