#pragma once

#include <optional>
#include <span>
#include <vector>

#include "calscan/geometry.hpp"
#include "calscan/image.hpp"
#include "calscan/landmarks.hpp"
#include "calscan/metrics.hpp"

namespace calscan {

struct RoiParams {
  int out_side = 512;
  double crop_factor = 2.0;  // crop side = factor * |L1 - L3|
  int clahe_tiles = 8;
  double clahe_clip = 2.0;
};

/// Original -> ROI coordinates: optional horizontal flip about the source
/// width, then a similarity.
struct RoiMapping {
  bool flipped = false;
  int source_width = 0;
  Similarity2 transform;

  Point2 apply(Point2 p) const;
  Point2 invert(Point2 q) const;
};

struct RoiResult {
  GrayImage roi;
  RoiMapping to_roi;
  std::optional<Mask> mask;
};

/// Mirrors to the toe-left handedness if needed, rotates L1->L3 onto the
/// -x direction, crops the square of side crop_factor * |L1 - L3| centred on
/// the landmark centroid, resamples to out_side and applies CLAHE. Polygons
/// go through the same mapping and are rasterised (even-odd, pixel centres)
/// into the mask.
RoiResult normalize_roi(const GrayImage& img, const LandmarkSet& lm,
                        const std::optional<std::vector<Polygon>>& polygons = std::nullopt,
                        const RoiParams& params = {});

/// Union of even-odd interiors of the polygons, sampled at pixel centres.
Mask rasterize(std::span<const Polygon> polygons, int width, int height);

}  // namespace calscan
