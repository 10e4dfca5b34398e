#include "calscan/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calscan/errors.hpp"

namespace calscan {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : GrayImage(width, height,
                std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill)) {}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    throw ArgumentError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                        std::to_string(height));
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height) {
    throw ArgumentError("pixel buffer size does not match image dimensions");
  }
}

double GrayImage::sample_border(int x0, int y0, double ax, double ay) const {
  const double top = tap(x0, y0) + ax * (tap(x0 + 1, y0) - tap(x0, y0));
  const double bot = tap(x0, y0 + 1) + ax * (tap(x0 + 1, y0 + 1) - tap(x0, y0 + 1));
  return top + ay * (bot - top);
}

std::uint8_t to_u8(double v) {
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v));
}

}  // namespace calscan
