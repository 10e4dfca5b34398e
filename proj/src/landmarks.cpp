#include "calscan/landmarks.hpp"

#include <cmath>

#include "calscan/transforms.hpp"

namespace calscan {

bool LandmarkSet::finite() const {
  for (const Point2& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
  return true;
}

bool toe_left(const LandmarkSet& lm) { return lm.L3().x < lm.L1().x; }

bool is_mirrored(const LandmarkSet& lm) {
  // Toe-left upright in y-down coordinates: L2 sits above the chord, which
  // makes cross(L3 - L1, L2 - L1) positive.
  return cross(lm.L3() - lm.L1(), lm.L2() - lm.L1()) < 0.0;
}

double l1_l3_angle(const LandmarkSet& lm) {
  const Vec2 d = lm.L3() - lm.L1();
  return std::atan2(d.y, d.x);
}

LandmarkSet transform(const LandmarkSet& lm, const Similarity2& t) {
  LandmarkSet out;
  for (int i = 0; i < kNumLandmarks; ++i) out[i] = t.apply(lm[i]);
  return out;
}

LandmarkSet flip_landmarks(const LandmarkSet& lm, int width) {
  LandmarkSet out;
  for (int i = 0; i < kNumLandmarks; ++i) out[i] = flip_point(lm[i], width);
  return out;
}

Polygon transform(const Polygon& poly, const Similarity2& t) {
  Polygon out;
  out.reserve(poly.size());
  for (const Point2& p : poly) out.push_back(t.apply(p));
  return out;
}

Polygon flip_polygon(const Polygon& poly, int width) {
  Polygon out;
  out.reserve(poly.size());
  for (const Point2& p : poly) out.push_back(flip_point(p, width));
  return out;
}

bool point_in_polygon(const Polygon& poly, Point2 p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

}  // namespace calscan
