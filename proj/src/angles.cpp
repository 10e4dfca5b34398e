#include "calscan/angles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "calscan/errors.hpp"

namespace calscan {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

void require_nonzero(Vec2 v, const char* what) {
  if (!(v.x != 0.0 || v.y != 0.0)) throw DegenerateGeometryError(std::string(what) + ": coincident points");
}

}  // namespace

double signed_angle(Vec2 u, Vec2 v) {
  require_nonzero(u, "signed_angle");
  require_nonzero(v, "signed_angle");
  const double a = std::atan2(cross(u, v), dot(u, v)) * kDeg;
  return a == -180.0 ? 180.0 : a;
}

double bohler_angle(const LandmarkSet& lm) {
  const Vec2 a = lm.L2() - lm.L1();
  const Vec2 b = lm.L3() - lm.L2();
  require_nonzero(a, "bohler_angle (L1, L2)");
  require_nonzero(b, "bohler_angle (L2, L3)");
  const double ba = -signed_angle(a, b);
  return ba == -180.0 ? 180.0 : ba;
}

double gissane_angle(const LandmarkSet& lm) {
  const Vec2 a = lm.L2() - lm.L4();
  const Vec2 b = lm.L3() - lm.L4();
  require_nonzero(a, "gissane_angle (L2, L4)");
  require_nonzero(b, "gissane_angle (L3, L4)");
  // atan2 form of the arccos; same value, better conditioned near 0 and 180.
  return std::atan2(std::abs(cross(a, b)), dot(a, b)) * kDeg;
}

AngleReport angle_report(const LandmarkSet& lm) {
  AngleReport r;
  r.bohler = bohler_angle(lm);
  r.gissane = gissane_angle(lm);
  r.bohler_in_range = r.bohler >= 20.0 && r.bohler <= 45.0;
  r.gissane_in_range = r.gissane >= 90.0 && r.gissane <= 150.0;
  return r;
}

}  // namespace calscan
