#pragma once

#include "calscan/geometry.hpp"
#include "calscan/image.hpp"

namespace calscan {

/// Rotates content by theta about center; canvas size is kept and
/// destination q reads the source at R(-theta)(q - center) + center.
GrayImage rotate_image(const GrayImage& img, double theta, Point2 center);

/// Point map matching rotate_image.
Similarity2 rotation_about(double theta, Point2 center);

GrayImage flip_horizontal(const GrayImage& img);

/// Point map matching flip_horizontal: x -> width - 1 - x.
inline Point2 flip_point(Point2 p, int width) { return {width - 1.0 - p.x, p.y}; }

/// Square crop of `side` px at `top_left` (pixel-centre convention), bilinearly
/// resampled to out_side x out_side.
GrayImage crop_resize(const GrayImage& img, Point2 top_left, double side, int out_side);

/// Point map from source coordinates into crop_resize output coordinates.
Similarity2 crop_resize_transform(Point2 top_left, double side, int out_side);

/// Uniform bilinear rescale by `factor`; output dims are round(dim * factor).
GrayImage resize_by(const GrayImage& img, double factor);

/// Point map matching resize_by (pixel-centre aligned).
Similarity2 resize_transform(double factor);

/// Renders dst(q) = img(to_source(q)) with bilinear reads (0 outside).
GrayImage warp(const GrayImage& img, int out_width, int out_height, const Similarity2& to_source);

}  // namespace calscan
