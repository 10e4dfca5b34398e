#include "calscan/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "calscan/errors.hpp"

namespace calscan {

GrayImage warp(const GrayImage& img, int out_width, int out_height, const Similarity2& to_source) {
  GrayImage out(out_width, out_height);
  const Vec2 step_x = to_source.apply(Vec2{1.0, 0.0});
  const Vec2 step_y = to_source.apply(Vec2{0.0, 1.0});
  const Point2 origin = to_source.apply(Point2{0.0, 0.0});
  for (int y = 0; y < out_height; ++y) {
    const Point2 row = origin + step_y * static_cast<double>(y);
    for (int x = 0; x < out_width; ++x) {
      out.at(x, y) = to_u8(img.sample(row + step_x * static_cast<double>(x)));
    }
  }
  return out;
}

Similarity2 rotation_about(double theta, Point2 center) {
  const Vec2 c = as_vec(center);
  return {theta, 1.0, c - rotate_vec(c, theta)};
}

GrayImage rotate_image(const GrayImage& img, double theta, Point2 center) {
  if (theta == 0.0) return img;
  const Similarity2 to_source = rotation_about(-theta, center);
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(x, y) = to_u8(img.sample(to_source.apply(Point2{double(x), double(y)})));
    }
  }
  return out;
}

GrayImage flip_horizontal(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.at(img.width() - 1 - x, y) = img.at(x, y);
  }
  return out;
}

Similarity2 crop_resize_transform(Point2 top_left, double side, int out_side) {
  if (!(side >= 1.0) || out_side < 1) throw ArgumentError("crop_resize: side and out_side must be >= 1");
  const double k = out_side / side;
  return {0.0, k, Vec2{(0.5 - top_left.x) * k - 0.5, (0.5 - top_left.y) * k - 0.5}};
}

GrayImage crop_resize(const GrayImage& img, Point2 top_left, double side, int out_side) {
  const Similarity2 to_source = crop_resize_transform(top_left, side, out_side).inverse();
  GrayImage out(out_side, out_side);
  for (int y = 0; y < out_side; ++y) {
    for (int x = 0; x < out_side; ++x) {
      out.at(x, y) = to_u8(img.sample(to_source.apply(Point2{double(x), double(y)})));
    }
  }
  return out;
}

Similarity2 resize_transform(double factor) {
  if (!(factor > 0.0)) throw ArgumentError("resize factor must be positive");
  return {0.0, factor, Vec2{0.5 * factor - 0.5, 0.5 * factor - 0.5}};
}

GrayImage resize_by(const GrayImage& img, double factor) {
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * factor)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * factor)));
  if (w == img.width() && h == img.height() && factor == 1.0) return img;
  const Similarity2 to_source = resize_transform(factor).inverse();
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.at(x, y) = to_u8(img.sample(to_source.apply(Point2{double(x), double(y)})));
    }
  }
  return out;
}

}  // namespace calscan
