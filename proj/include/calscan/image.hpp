#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "calscan/geometry.hpp"

namespace calscan {

/// 8-bit single-channel raster, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  bool contains(Point2 p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_ - 1.0 && p.y <= height_ - 1.0;
  }

  /// Bilinear read; taps outside the canvas read as 0.
  double sample(double x, double y) const {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double ax = x - fx;
    const double ay = y - fy;
    if (x0 >= 0 && y0 >= 0 && x0 + 1 < width_ && y0 + 1 < height_) {
      const std::uint8_t* r0 = &pixels_[static_cast<std::size_t>(y0) * width_ + x0];
      const std::uint8_t* r1 = r0 + width_;
      const double top = r0[0] + ax * (r0[1] - r0[0]);
      const double bot = r1[0] + ax * (r1[1] - r1[0]);
      return top + ay * (bot - top);
    }
    return sample_border(x0, y0, ax, ay);
  }
  double sample(Point2 p) const { return sample(p.x, p.y); }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  double sample_border(int x0, int y0, double ax, double ay) const;
  double tap(int x, int y) const {
    return (x < 0 || y < 0 || x >= width_ || y >= height_) ? 0.0 : static_cast<double>(at(x, y));
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Rounds and clamps to [0, 255].
std::uint8_t to_u8(double v);

}  // namespace calscan
