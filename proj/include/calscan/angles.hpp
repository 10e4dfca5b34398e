#pragma once

#include "calscan/geometry.hpp"
#include "calscan/landmarks.hpp"

namespace calscan {

inline constexpr const char* kAngleConvention = "convention v1";

struct AngleReport {
  double bohler = 0.0;   // degrees, (-180, 180]
  double gissane = 0.0;  // degrees, [0, 180]
  bool bohler_in_range = false;   // [20, 45]
  bool gissane_in_range = false;  // [90, 150]
};

/// Angle from u to v in degrees, (-180, 180]. Positive turns +x towards +y.
double signed_angle(Vec2 u, Vec2 v);

/// 180 degrees minus the angle L1-L2-L3, positive when L2 lies above the
/// L1-L3 chord of a toe-left foot (y down) and negative when depressed.
double bohler_angle(const LandmarkSet& lm);

/// Unsigned angle L2-L4-L3 in degrees.
double gissane_angle(const LandmarkSet& lm);

AngleReport angle_report(const LandmarkSet& lm);

}  // namespace calscan
