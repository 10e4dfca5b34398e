#include "calscan/overlay.hpp"

#include <algorithm>
#include <cmath>

namespace calscan {

void RgbImage::put(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  std::copy(c.begin(), c.end(), data.begin() + (static_cast<std::size_t>(y) * width + x) * 3);
}

Rgb RgbImage::get(int x, int y) const {
  const auto* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
  return {p[0], p[1], p[2]};
}

RgbImage to_rgb(const GrayImage& img) {
  RgbImage out{img.width(), img.height(), {}};
  out.data.reserve(img.pixels().size() * 3);
  for (std::uint8_t v : img.pixels()) out.data.insert(out.data.end(), {v, v, v});
  return out;
}

void draw_disc(RgbImage& img, Point2 c, double radius, Rgb color) {
  const int x0 = static_cast<int>(std::floor(c.x - radius));
  const int x1 = static_cast<int>(std::ceil(c.x + radius));
  const int y0 = static_cast<int>(std::floor(c.y - radius));
  const int y1 = static_cast<int>(std::ceil(c.y + radius));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if ((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) <= radius * radius) img.put(x, y, color);
    }
  }
}

void draw_line(RgbImage& img, Point2 a, Point2 b, double width, Rgb color) {
  const double len = distance(a, b);
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
  for (int i = 0; i <= steps; ++i) draw_disc(img, a + (b - a) * (double(i) / steps), 0.5 * width, color);
}

RgbImage render_overlay(const GrayImage& img, const LandmarkSet& lm) {
  RgbImage out = to_rgb(img);
  const double w = std::max(1.0, std::max(img.width(), img.height()) / 400.0);
  constexpr Rgb kBohler{255, 220, 0};
  constexpr Rgb kGissane{0, 220, 255};
  constexpr Rgb kPoint{255, 40, 40};
  draw_line(out, lm.L2(), lm.L1(), w, kBohler);
  draw_line(out, lm.L2(), lm.L3(), w, kBohler);
  draw_line(out, lm.L4(), lm.L2(), w, kGissane);
  draw_line(out, lm.L4(), lm.L3(), w, kGissane);
  for (const Point2& p : lm.points) draw_disc(out, p, 2.5 * w, kPoint);
  return out;
}

}  // namespace calscan
