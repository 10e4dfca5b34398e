#pragma once

#include <array>
#include <vector>

#include "calscan/geometry.hpp"

namespace calscan {

inline constexpr int kNumLandmarks = 4;

/// L1 posterior-superior tuberosity, L2 top of the posterior facet, L3
/// anterior process, L4 the angle of Gissane. Index i holds L(i+1).
struct LandmarkSet {
  std::array<Point2, kNumLandmarks> points{};

  Point2& operator[](int i) { return points[i]; }
  const Point2& operator[](int i) const { return points[i]; }
  const Point2& L1() const { return points[0]; }
  const Point2& L2() const { return points[1]; }
  const Point2& L3() const { return points[2]; }
  const Point2& L4() const { return points[3]; }

  bool finite() const;
  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

using Polygon = std::vector<Point2>;

/// True iff x(L3) < x(L1): the anterior process lies left of the tuberosity.
bool toe_left(const LandmarkSet& lm);

/// Orientation-independent handedness test: true when the configuration is
/// the mirror image of a toe-left, upright calcaneus (L2 on the other side of
/// the L1->L3 chord). Unlike toe_left this is unchanged by in-plane rotation.
bool is_mirrored(const LandmarkSet& lm);

/// Direction of the L1 -> L3 line, radians.
double l1_l3_angle(const LandmarkSet& lm);

LandmarkSet transform(const LandmarkSet& lm, const Similarity2& t);
LandmarkSet flip_landmarks(const LandmarkSet& lm, int width);
Polygon transform(const Polygon& poly, const Similarity2& t);
Polygon flip_polygon(const Polygon& poly, int width);

/// Even-odd point-in-polygon test (implicit closure).
bool point_in_polygon(const Polygon& poly, Point2 p);

}  // namespace calscan
