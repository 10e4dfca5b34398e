#pragma once

#include <cmath>
#include <numbers>

namespace calscan {

/// Displacement in image pixels (x right, y down).
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double k) { return {a.x * k, a.y * k}; }
  friend constexpr Vec2 operator*(double k, Vec2 a) { return {a.x * k, a.y * k}; }
  friend constexpr Vec2 operator/(Vec2 a, double k) { return {a.x / k, a.y / k}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

/// Position in image pixels: x is the column, y the row.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Point2 operator+(Point2 p, Vec2 v) { return {p.x + v.x, p.y + v.y}; }
  friend constexpr Point2 operator-(Point2 p, Vec2 v) { return {p.x - v.x, p.y - v.y}; }
  friend constexpr Vec2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr bool operator==(Point2, Point2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline Vec2 as_vec(Point2 p) { return {p.x, p.y}; }
inline Point2 as_point(Vec2 v) { return {v.x, v.y}; }

/// [cos -sin; sin cos] * v. The single rotation convention used everywhere.
inline Vec2 rotate_vec(Vec2 v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::remainder(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  return a;
}

/// p -> scale * R(rotation) * p + translation.
struct Similarity2 {
  double rotation = 0.0;
  double scale = 1.0;
  Vec2 translation{};

  static Similarity2 identity() { return {}; }

  Point2 apply(Point2 p) const { return as_point(rotate_vec(as_vec(p), rotation) * scale + translation); }
  Vec2 apply(Vec2 v) const { return rotate_vec(v, rotation) * scale; }

  Similarity2 inverse() const;

  /// Composition: (a * b)(p) == a(b(p)).
  friend Similarity2 operator*(const Similarity2& a, const Similarity2& b);
};

inline Point2 apply_similarity(const Similarity2& t, Point2 p) { return t.apply(p); }

}  // namespace calscan
