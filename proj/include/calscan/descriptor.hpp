#pragma once

#include <array>
#include <span>
#include <vector>

#include "calscan/geometry.hpp"
#include "calscan/image.hpp"

namespace calscan {

inline constexpr int kDescriptorSize = 128;
inline constexpr double kDescriptorClip = 0.2;

/// 4x4 spatial cells x 8 orientation bins, unit L2 norm (or all zero).
using Descriptor = std::array<float, kDescriptorSize>;

/// Square image window: centre, full side length in px, and orientation.
/// The window's local +x axis is rotate_vec((1, 0), theta).
struct PatchSpec {
  Point2 center;
  double side = 16.0;
  double theta = 0.0;
};

struct Orientation {
  double angle = 0.0;       // (-pi, pi]
  bool degenerate = false;  // window had no gradient energy
};

/// Peak of a 36-bin gradient orientation histogram over the disc inscribed in
/// the side x side window (Gaussian weight, sigma = side / 2), refined by a
/// parabola through the peak bin and its neighbours.
Orientation dominant_orientation(const GrayImage& img, Point2 center, double side);

/// SIFT-layout descriptor of the window. Flat windows give the zero vector.
Descriptor extract_descriptor(const GrayImage& img, const PatchSpec& patch);

std::vector<Descriptor> extract_descriptors(const GrayImage& img, std::span<const PatchSpec> patches);

/// Scales v to unit L2 norm with every component <= clip. When fewer
/// than 1/clip^2 components are non-zero that is impossible, and the
/// classic normalise-clip-renormalise result is returned instead.
void normalize_clipped(std::span<float> v, double clip = kDescriptorClip);

}  // namespace calscan
