#include "calscan/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "calscan/errors.hpp"

namespace calscan {
namespace {

constexpr int kCells = 16;            // samples per side of the descriptor grid
constexpr int kGrid = kCells + 2;     // one extra ring for central differences
constexpr int kSpatialBins = 4;
constexpr int kOrientBins = 8;
constexpr int kHistBins = 36;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

using Grid = std::array<double, kGrid * kGrid>;

// Box-filtered intensities on a kGrid x kGrid lattice aligned to theta.
// Cell (i, j) of the inner 16x16 covers local coordinates
// [(i/16 - 1/2) side, ((i+1)/16 - 1/2) side) along each axis.
Grid sample_grid(const GrayImage& img, Point2 center, double side, double theta) {
  const double h = side / kCells;
  const int sub = std::clamp(static_cast<int>(std::ceil(h)), 1, 4);
  const Vec2 ex = rotate_vec({1.0, 0.0}, theta);
  const Vec2 ey = rotate_vec({0.0, 1.0}, theta);
  Grid g{};
  for (int j = 0; j < kGrid; ++j) {
    for (int i = 0; i < kGrid; ++i) {
      const double u0 = (i - 1 + 0.5) * h - 0.5 * side;
      const double v0 = (j - 1 + 0.5) * h - 0.5 * side;
      double acc = 0.0;
      for (int b = 0; b < sub; ++b) {
        const double v = v0 + ((b + 0.5) / sub - 0.5) * h;
        for (int a = 0; a < sub; ++a) {
          const double u = u0 + ((a + 0.5) / sub - 0.5) * h;
          acc += img.sample(center + ex * u + ey * v);
        }
      }
      g[j * kGrid + i] = acc / (sub * sub);
    }
  }
  return g;
}

// Calls fn(i, j, dx, dy) for every inner cell, with gradients in grid units.
template <typename Fn>
void for_each_gradient(const Grid& g, Fn&& fn) {
  for (int j = 0; j < kCells; ++j) {
    for (int i = 0; i < kCells; ++i) {
      const int c = (j + 1) * kGrid + (i + 1);
      fn(i, j, 0.5 * (g[c + 1] - g[c - 1]), 0.5 * (g[c + kGrid] - g[c - kGrid]));
    }
  }
}

double positive_angle(double dx, double dy) {
  double a = std::atan2(dy, dx);
  if (a < 0.0) a += kTwoPi;
  return a;
}

}  // namespace

Orientation dominant_orientation(const GrayImage& img, Point2 center, double side) {
  if (!(side >= 4.0)) throw ArgumentError("dominant_orientation: side must be >= 4");
  const Grid g = sample_grid(img, center, side, 0.0);
  constexpr double half = 0.5 * kCells;
  constexpr double sigma = 0.5 * kCells;  // side / 2 in cell units

  std::array<double, kHistBins> hist{};
  double energy = 0.0;
  for_each_gradient(g, [&](int i, int j, double dx, double dy) {
    const double du = i + 0.5 - half;
    const double dv = j + 0.5 - half;
    const double r2 = du * du + dv * dv;
    if (r2 > half * half) return;
    const double mag = std::hypot(dx, dy);
    if (mag == 0.0) return;
    const double w = mag * std::exp(-r2 / (2.0 * sigma * sigma));
    const double pos = positive_angle(dx, dy) / kTwoPi * kHistBins;
    const int k0 = static_cast<int>(std::floor(pos));
    const double f = pos - k0;
    hist[((k0 % kHistBins) + kHistBins) % kHistBins] += w * (1.0 - f);
    hist[(k0 + 1) % kHistBins] += w * f;
    energy += w;
  });
  if (energy <= 0.0) return {0.0, true};

  std::array<double, kHistBins> smooth{};
  for (int k = 0; k < kHistBins; ++k) {
    auto at = [&](int d) { return hist[(k + d + kHistBins) % kHistBins]; };
    smooth[k] = (at(-2) + at(2) + 4.0 * (at(-1) + at(1)) + 6.0 * at(0)) / 16.0;
  }
  int peak = 0;
  for (int k = 1; k < kHistBins; ++k)
    if (smooth[k] > smooth[peak]) peak = k;

  const double l = smooth[(peak + kHistBins - 1) % kHistBins];
  const double c = smooth[peak];
  const double r = smooth[(peak + 1) % kHistBins];
  const double denom = l - 2.0 * c + r;
  const double offset = denom != 0.0 ? 0.5 * (l - r) / denom : 0.0;
  return {wrap_angle((peak + offset) * kTwoPi / kHistBins), false};
}

void normalize_clipped(std::span<float> v, double clip) {
  double sq = 0.0;
  std::size_t nonzero = 0;
  for (float x : v) {
    sq += static_cast<double>(x) * x;
    nonzero += x != 0.0f;
  }
  if (sq <= 0.0) {
    std::fill(v.begin(), v.end(), 0.0f);
    return;
  }

  if (static_cast<double>(nonzero) * clip * clip < 1.0) {
    const double inv = 1.0 / std::sqrt(sq);
    double sq2 = 0.0;
    for (float& x : v) {
      x = static_cast<float>(std::min(x * inv, clip));
      sq2 += static_cast<double>(x) * x;
    }
    const double inv2 = 1.0 / std::sqrt(sq2);
    for (float& x : v) x = static_cast<float>(x * inv2);
    return;
  }

  // Water-filling: find k saturated components and the scale for the rest so
  // that k clip^2 + scale^2 * sum(rest^2) = 1 with scale * rest <= clip.
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double rest = sq;
  double scale = 1.0 / std::sqrt(sq);
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    scale = std::sqrt(std::max(0.0, 1.0 - k * clip * clip) / rest);
    if (sorted[k] * scale <= clip) break;
    rest -= sorted[k] * sorted[k];
    if (rest <= 0.0) break;
  }
  for (float& x : v) x = static_cast<float>(std::min(x * scale, clip));
}

Descriptor extract_descriptor(const GrayImage& img, const PatchSpec& patch) {
  const Grid g = sample_grid(img, patch.center, patch.side, patch.theta);
  constexpr double half = 0.5 * kCells;
  constexpr double sigma = 0.5 * kCells;
  constexpr double cells_per_bin = static_cast<double>(kCells) / kSpatialBins;

  std::array<double, kDescriptorSize> hist{};
  for_each_gradient(g, [&](int i, int j, double dx, double dy) {
    const double mag = std::hypot(dx, dy);
    if (mag == 0.0) return;
    const double du = i + 0.5 - half;
    const double dv = j + 0.5 - half;
    const double w = mag * std::exp(-(du * du + dv * dv) / (2.0 * sigma * sigma));

    const double bx = (i + 0.5) / cells_per_bin - 0.5;
    const double by = (j + 0.5) / cells_per_bin - 0.5;
    const double bo = positive_angle(dx, dy) / kTwoPi * kOrientBins;
    const int x0 = static_cast<int>(std::floor(bx));
    const int y0 = static_cast<int>(std::floor(by));
    const int o0 = static_cast<int>(std::floor(bo));
    const double fx = bx - x0;
    const double fy = by - y0;
    const double fo = bo - o0;

    for (int dyb = 0; dyb < 2; ++dyb) {
      const int yb = y0 + dyb;
      if (yb < 0 || yb >= kSpatialBins) continue;
      const double wy = dyb ? fy : 1.0 - fy;
      for (int dxb = 0; dxb < 2; ++dxb) {
        const int xb = x0 + dxb;
        if (xb < 0 || xb >= kSpatialBins) continue;
        const double wxy = wy * (dxb ? fx : 1.0 - fx);
        for (int dob = 0; dob < 2; ++dob) {
          const int ob = (o0 + dob) % kOrientBins;
          hist[(yb * kSpatialBins + xb) * kOrientBins + ob] += w * wxy * (dob ? fo : 1.0 - fo);
        }
      }
    }
  });

  Descriptor d{};
  for (int k = 0; k < kDescriptorSize; ++k) d[k] = static_cast<float>(hist[k]);
  normalize_clipped(d);
  return d;
}

std::vector<Descriptor> extract_descriptors(const GrayImage& img, std::span<const PatchSpec> patches) {
  std::vector<Descriptor> out;
  out.reserve(patches.size());
  for (const PatchSpec& p : patches) out.push_back(extract_descriptor(img, p));
  return out;
}

}  // namespace calscan
