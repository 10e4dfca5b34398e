#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "calscan/image.hpp"
#include "calscan/landmarks.hpp"

namespace calscan {

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB

  void put(int x, int y, Rgb c);
  Rgb get(int x, int y) const;
};

RgbImage to_rgb(const GrayImage& img);
void draw_disc(RgbImage& img, Point2 c, double radius, Rgb color);
void draw_line(RgbImage& img, Point2 a, Point2 b, double width, Rgb color);

/// Grey image with the Bohler rays (L2->L1, L2->L3) in yellow, the Gissane
/// rays (L4->L2, L4->L3) in cyan and the landmarks as red dots.
RgbImage render_overlay(const GrayImage& img, const LandmarkSet& lm);

}  // namespace calscan
