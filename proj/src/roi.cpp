#include "calscan/roi.hpp"

#include <cmath>
#include <numbers>

#include "calscan/clahe.hpp"
#include "calscan/errors.hpp"
#include "calscan/transforms.hpp"

namespace calscan {

Point2 RoiMapping::apply(Point2 p) const {
  return transform.apply(flipped ? flip_point(p, source_width) : p);
}

Point2 RoiMapping::invert(Point2 q) const {
  const Point2 p = transform.inverse().apply(q);
  return flipped ? flip_point(p, source_width) : p;
}

Mask rasterize(std::span<const Polygon> polygons, int width, int height) {
  Mask m{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 0)};
  for (const Polygon& poly : polygons) {
    if (poly.size() < 3) continue;
    double x0 = poly[0].x, x1 = x0, y0 = poly[0].y, y1 = y0;
    for (const Point2& p : poly) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
    const int xa = std::max(0, static_cast<int>(std::floor(x0))), xb = std::min(width - 1, static_cast<int>(std::ceil(x1)));
    const int ya = std::max(0, static_cast<int>(std::floor(y0))), yb = std::min(height - 1, static_cast<int>(std::ceil(y1)));
    for (int y = ya; y <= yb; ++y)
      for (int x = xa; x <= xb; ++x)
        if (point_in_polygon(poly, {double(x), double(y)})) m.on[static_cast<std::size_t>(y) * width + x] = 1;
  }
  return m;
}

RoiResult normalize_roi(const GrayImage& img, const LandmarkSet& lm, const std::optional<std::vector<Polygon>>& polygons,
                        const RoiParams& params) {
  if (!lm.finite()) throw InputError("normalize_roi: non-finite landmark");
  const double chord = distance(lm.L1(), lm.L3());
  if (!(chord > 8.0)) throw InputError("normalize_roi: |L1 - L3| must exceed 8 px");
  if (params.out_side < 1 || !(params.crop_factor > 0.0)) throw ArgumentError("normalize_roi: invalid parameters");

  RoiMapping map;
  map.flipped = is_mirrored(lm);
  map.source_width = img.width();
  const LandmarkSet base = map.flipped ? flip_landmarks(lm, img.width()) : lm;

  const Vec2 u = base.L3() - base.L1();
  const double phi = std::numbers::pi - std::atan2(u.y, u.x);
  const Point2 mid = base.L1() + u / 2.0;
  const Similarity2 rot = rotation_about(phi, mid);

  Vec2 centroid{};
  for (const Point2& p : base.points) centroid = centroid + as_vec(rot.apply(p)) / kNumLandmarks;
  const double side = params.crop_factor * chord;
  const Point2 top_left = as_point(centroid) - Vec2{side / 2.0, side / 2.0};
  map.transform = crop_resize_transform(top_left, side, params.out_side) * rot;

  const GrayImage source = map.flipped ? flip_horizontal(img) : img;
  RoiResult out{clahe(warp(source, params.out_side, params.out_side, map.transform.inverse()), params.clahe_tiles,
                      params.clahe_clip),
                map, std::nullopt};
  if (polygons) {
    std::vector<Polygon> mapped;
    for (const Polygon& poly : *polygons) {
      Polygon q;
      for (const Point2& p : poly) q.push_back(map.apply(p));
      mapped.push_back(std::move(q));
    }
    out.mask = rasterize(mapped, params.out_side, params.out_side);
  }
  return out;
}

}  // namespace calscan
