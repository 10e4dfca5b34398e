#include "calscan/geometry.hpp"

#include "calscan/errors.hpp"

namespace calscan {

Similarity2 Similarity2::inverse() const {
  if (!(scale > 0.0)) throw ArgumentError("Similarity2 scale must be positive");
  const double inv_scale = 1.0 / scale;
  return {-rotation, inv_scale, -(rotate_vec(translation, -rotation) * inv_scale)};
}

Similarity2 operator*(const Similarity2& a, const Similarity2& b) {
  return {a.rotation + b.rotation, a.scale * b.scale, a.apply(b.translation) + a.translation};
}

}  // namespace calscan
